"""Effective Hamiltonians of viscous Hamilton-Jacobi equations in 1-d random environments.

Configs, Hamiltonian specs and environment models are the same JSON objects the
``vhj`` command line tool reads; here they may be passed as dicts.
"""

import json as _json

from . import _core
from ._core import ConfigError, Environment, Error, Hamiltonian

__all__ = [
    "ConfigError",
    "Environment",
    "Error",
    "Hamiltonian",
    "config_hash",
    "describe",
    "estimate",
    "find_witness",
    "hamiltonian",
    "run",
    "sample_environment",
]


def _text(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def run(config, workers=1, out_dir=None):
    """Run an experiment config and return its report as a dict.

    With ``out_dir`` the CSV/JSON/SVG artifacts are written as the CLI would.
    """
    return _json.loads(_core.run(_text(config), workers, "" if out_dir is None else str(out_dir)))


def describe(config):
    return _core.describe(_text(config))


def config_hash(config):
    return _core.config_hash(_text(config))


def hamiltonian(spec):
    return Hamiltonian(_text(spec))


def sample_environment(model, lo, hi, dx, seed):
    return _core.sample_environment(_text(model), lo, hi, dx, seed)


def find_witness(env, h, y, kind="hill", delta_min=1e-3):
    return _core.find_witness(env, h, y, kind, delta_min)


def estimate(model, ham, beta, theta, seeds, solver=None, workers=1):
    """Ensemble estimate of the effective Hamiltonian at ``theta``."""
    if not isinstance(ham, Hamiltonian):
        ham = hamiltonian(ham)
    return _core.estimate(_text(model), ham, beta, theta, list(seeds), _text(solver or {}), workers)
