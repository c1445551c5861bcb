#pragma once

#include <span>

#include "ettwin/core/geometry.hpp"

namespace ettwin {

/// Angle between two unit vectors in degrees, via arccos of the clamped dot
/// product; exactly 0 for identical inputs. Inputs must be unit norm within 1e-6.
double angular_error(const Vec3& a, const Vec3& b);

/// Nearest-rank percentile: the element at 1-based rank ceil(p/100 * n) of
/// the sorted values. p in (0, 100].
double percentile(std::span<const double> values, double p);

/// Sample Pearson correlation. Throws DegenerateSeries on zero variance.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

}  // namespace ettwin
