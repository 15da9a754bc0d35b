#include "mkv/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mkv {

namespace {

constexpr const char* kMagic = "# mkvlab-pathmeasure v1";

void put(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace

void write_path_measure(std::ostream& os, const PathMeasure& mu) {
    os << kMagic << '\n';
    os << mu.dim() << ' ' << mu.count() << ' ' << mu.grid().steps() << ' ';
    put(os, mu.grid().horizon());
    os << '\n';
    for (std::size_t i = 0; i < mu.count(); ++i)
        for (std::size_t k = 0; k <= mu.grid().steps(); ++k) {
            for (std::size_t j = 0; j < mu.dim(); ++j) {
                if (j) os << ' ';
                put(os, mu.value(i, k, j));
            }
            os << '\n';
        }
}

PathMeasure read_path_measure(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMagic) throw std::runtime_error("path measure file: bad header line");
    std::size_t d = 0, n = 0, m = 0;
    double horizon = 0.0;
    if (!(is >> d >> n >> m >> horizon)) throw std::runtime_error("path measure file: bad size line");
    TimeGrid grid(horizon, m);
    std::vector<double> data(n * (m + 1) * d);
    for (double& v : data)
        if (!(is >> v)) throw std::runtime_error("path measure file: truncated data");
    return {grid, d, n, std::move(data)};
}

void save_path_measure(const std::string& file, const PathMeasure& mu) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file + " for writing");
    write_path_measure(os, mu);
}

PathMeasure load_path_measure(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file);
    return read_path_measure(is);
}

}  // namespace mkv
