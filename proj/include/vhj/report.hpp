#pragma once

// Deterministic text artifacts: number formatting, CSV tables, SVG plots.

#include <cstdint>
#include <string>
#include <vector>

namespace vhj::report {

// Shortest round-trip decimal form ("%.17g" trimmed), so reruns emit
// identical bytes.
std::string fmt(double v);

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// Leading comment lines "# key=value" followed by a header and the rows.
std::string to_csv(const Table& t, const std::vector<std::pair<std::string, std::string>>& meta);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
    bool markers = false;
};

std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series);

// Creates parent directories as needed.
void write_file(const std::string& path, const std::string& content);

}  // namespace vhj::report
