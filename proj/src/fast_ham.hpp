#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "vhj/ham.hpp"

namespace vhj::detail {

// Flattened HamiltonianSpec for the inner loops of the solvers.
class FastG {
public:
    explicit FastG(const ham::HamiltonianSpec& spec) {
        for (const auto& g : spec.pieces) {
            Piece p;
            p.src = &g;
            p.well = g.well;
            if (const auto* s = std::get_if<ham::PowerWell>(&g.shape)) {
                p.kind = Kind::Power;
                p.gamma = s->gamma;
                p.left = p.right = s->scale;
            } else if (const auto* s = std::get_if<ham::AsymmetricPowerWell>(&g.shape)) {
                p.kind = Kind::Power;
                p.gamma = s->gamma;
                p.left = s->scale_left;
                p.right = s->scale_right;
            } else {
                p.kind = Kind::Other;
            }
            pieces_.push_back(p);
        }
    }

    double operator()(double x) const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : pieces_) best = std::min(best, value(p, x));
        return best;
    }

    // G(x) and the derivative of the active piece.
    double eval_deriv(double x, double& d) const {
        double best = std::numeric_limits<double>::infinity();
        const Piece* arg = &pieces_.front();
        for (const auto& p : pieces_) {
            const double v = value(p, x);
            if (v < best) {
                best = v;
                arg = &p;
            }
        }
        d = ham::deriv(*arg->src, x);
        return best;
    }

private:
    enum class Kind { Power, Other };
    struct Piece {
        Kind kind = Kind::Other;
        double well = 0.0, gamma = 2.0, left = 1.0, right = 1.0;
        const ham::ConvexPiece* src = nullptr;
    };

    static double value(const Piece& p, double x) {
        if (p.kind == Kind::Other) return ham::eval(*p.src, x);
        const double d = x - p.well;
        const double s = d < 0.0 ? p.left : p.right;
        const double r = std::abs(d);
        if (p.gamma == 2.0) return s * r * r;
        if (p.gamma == 1.0) return s * r;
        if (p.gamma == 3.0) return s * r * r * r;
        return s * std::pow(r, p.gamma);
    }

    std::vector<Piece> pieces_;
};

}  // namespace vhj::detail
