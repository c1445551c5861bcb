#include "ettwin/core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ettwin/core/error.hpp"

namespace ettwin {

double angular_error(const Vec3& a, const Vec3& b) {
    if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
        throw Error(ErrorKind::Validation, "angular_error expects unit vectors");
    if (a == b) return 0.0;
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "percentile of empty input");
    if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorKind::Validation, "percentile p must be in (0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw Error(ErrorKind::Validation, "pearson_r needs two series of equal length >= 2");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorKind::DegenerateSeries, "degenerate series (zero variance)");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace ettwin
