#include "mkv/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace mkv {

namespace {

double cascade(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return cascade(x, h) + cascade(x + h, n - h);
}

}  // namespace

double pairwise_sum(std::span<const double> x) { return cascade(x.data(), x.size()); }

double pairwise_mean(std::span<const double> x) {
    if (x.empty()) throw std::domain_error("mean of empty sample");
    return pairwise_sum(x) / static_cast<double>(x.size());
}

MeanStderr mean_and_stderr(std::span<const double> x) {
    MeanStderr r;
    r.mean = pairwise_mean(x);
    if (x.size() < 2) return r;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - r.mean) * (x[i] - r.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(x.size() - 1);
    r.se = std::sqrt(var / static_cast<double>(x.size()));
    return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(std::abs(y[i])));
    }
    return fit_line(lx, ly).slope;
}

}  // namespace mkv
