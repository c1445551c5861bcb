#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

#include "ettwin/core/error.hpp"
#include "ettwin/estimator/estimator.hpp"

namespace ettwin::estimator {

namespace {

// Pixel coordinates are scaled before building monomials to keep the design well conditioned.
constexpr double kCoordScale = 0.01;

}  // namespace

Vec2 pupil_centroid(const QuantizedImage& img, double dark_threshold) {
    if (!(dark_threshold > 0.0 && dark_threshold < 1.0))
        throw Error(ErrorKind::Validation, "dark_threshold must be a quantile in (0, 1)");
    const auto values = img.values();
    if (values.empty()) throw Error(ErrorKind::NoPupil, "no pupil found: empty image");
    std::vector<std::uint8_t> sorted(values.begin(), values.end());
    const auto k = static_cast<std::size_t>(dark_threshold * static_cast<double>(sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const std::uint8_t threshold = sorted[k];
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (threshold == 255 || *lo == *hi) throw Error(ErrorKind::NoPupil, "no pupil found: no dark region");

    const int w = img.width(), h = img.height();
    std::vector<int> label(values.size(), -1);
    std::vector<std::size_t> stack;
    std::size_t best_size = 0;
    double best_x = 0.0, best_y = 0.0;
    int next_label = 0;
    for (std::size_t start = 0; start < values.size(); ++start) {
        if (label[start] >= 0 || values[start] > threshold) continue;
        const int id = next_label++;
        label[start] = id;
        stack.assign(1, start);
        std::size_t size = 0;
        double sx = 0.0, sy = 0.0;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            ++size;
            sx += x + 0.5;
            sy += y + 0.5;
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                if (label[q] < 0 && values[q] <= threshold) {
                    label[q] = id;
                    stack.push_back(q);
                }
            };
            visit(x - 1, y);
            visit(x + 1, y);
            visit(x, y - 1);
            visit(x, y + 1);
        }
        if (size > best_size) {
            best_size = size;
            best_x = sx / static_cast<double>(size);
            best_y = sy / static_cast<double>(size);
        }
    }
    return {best_x, best_y};
}

std::optional<Vec2> glint_centroid(const QuantizedImage& img, const Vec2& pupil) {
    const double r2 = kGlintSearchRadiusPx * kGlintSearchRadiusPx;
    const int x0 = std::max(0, static_cast<int>(pupil.x() - kGlintSearchRadiusPx));
    const int x1 = std::min(img.width() - 1, static_cast<int>(pupil.x() + kGlintSearchRadiusPx));
    const int y0 = std::max(0, static_cast<int>(pupil.y() - kGlintSearchRadiusPx));
    const int y1 = std::min(img.height() - 1, static_cast<int>(pupil.y() + kGlintSearchRadiusPx));
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - pupil.x(), dy = y + 0.5 - pupil.y();
            if (dx * dx + dy * dy <= r2 && img.at(x, y) >= kGlintCode) {
                sx += x + 0.5;
                sy += y + 0.5;
                ++count;
            }
        }
    if (count == 0) return std::nullopt;
    return Vec2(sx / static_cast<double>(count), sy / static_cast<double>(count));
}

GeometricFeatures extract_geometric_features(const QuantizedImage& img, double dark_threshold) {
    GeometricFeatures f;
    f.pupil = pupil_centroid(img, dark_threshold);
    if (const auto g = glint_centroid(img, f.pupil)) f.glint_offset = *g - f.pupil;
    return f;
}

Eigen::VectorXd GeometricGazeModel::terms(const GeometricFeatures& f) const {
    const double x = f.pupil.x() * kCoordScale, y = f.pupil.y() * kCoordScale;
    Eigen::VectorXd t(term_count(use_glints));
    t.head(6) << 1.0, x, y, x * x, x * y, y * y;
    if (use_glints) {
        const Vec2 g = f.glint_offset.value_or(mean_glint_offset) * kCoordScale;
        // The glint block drops its constant, which would duplicate the first.
        t.tail(5) << g.x(), g.y(), g.x() * g.x(), g.x() * g.y(), g.y() * g.y();
    }
    return t;
}

Vec3 GeometricGazeModel::predict(const GeometricFeatures& f) const {
    const Eigen::Vector2d py = coefficients.transpose() * terms(f);
    return gaze_from_pitch_yaw(py.x(), py.y());
}

nlohmann::json GeometricGazeModel::to_json() const {
    nlohmann::json j;
    j["kind"] = "geometric";
    j["degree"] = kDegree;
    j["use_glints"] = use_glints;
    j["dark_threshold"] = dark_threshold;
    j["mean_glint_offset"] = {mean_glint_offset.x(), mean_glint_offset.y()};
    nlohmann::json c = nlohmann::json::array();
    for (Eigen::Index r = 0; r < coefficients.rows(); ++r) c.push_back({coefficients(r, 0), coefficients(r, 1)});
    j["coefficients"] = std::move(c);
    return j;
}

GeometricGazeModel GeometricGazeModel::from_json(const nlohmann::json& j) {
    GeometricGazeModel m;
    m.use_glints = j.at("use_glints").get<bool>();
    m.dark_threshold = j.at("dark_threshold").get<double>();
    const auto g = j.at("mean_glint_offset").get<std::vector<double>>();
    m.mean_glint_offset = Vec2(g.at(0), g.at(1));
    const auto& c = j.at("coefficients");
    if (static_cast<int>(c.size()) != term_count(m.use_glints))
        throw Error(ErrorKind::Validation, "geometric checkpoint has the wrong coefficient count");
    m.coefficients.resize(static_cast<Eigen::Index>(c.size()), 2);
    for (std::size_t r = 0; r < c.size(); ++r)
        for (int k = 0; k < 2; ++k) m.coefficients(static_cast<Eigen::Index>(r), k) = c[r][k].get<double>();
    return m;
}

GeometricGazeModel fit_geometric(std::span<const GeometricFeatures> features, std::span<const Vec2> pitch_yaw,
                                 bool use_glints, double dark_threshold) {
    if (features.size() != pitch_yaw.size()) throw Error(ErrorKind::Validation, "feature and label counts differ");
    if (features.size() < static_cast<std::size_t>(kMinGeometricSamples))
        throw Error(ErrorKind::Validation, "geometric fit needs at least 12 samples");
    GeometricGazeModel model;
    model.use_glints = use_glints;
    model.dark_threshold = dark_threshold;
    if (use_glints) {
        Vec2 sum = Vec2::Zero();
        std::size_t count = 0;
        for (const auto& f : features)
            if (f.glint_offset) {
                sum += *f.glint_offset;
                ++count;
            }
        if (count > 0) model.mean_glint_offset = sum / static_cast<double>(count);
    }
    const auto n = static_cast<Eigen::Index>(features.size());
    const int k = GeometricGazeModel::term_count(use_glints);
    Eigen::MatrixXd design(n, k);
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.row(i) = model.terms(features[static_cast<std::size_t>(i)]).transpose();
        y.row(i) = pitch_yaw[static_cast<std::size_t>(i)].transpose();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw Error(ErrorKind::IllConditioned, "ill-conditioned fit: rank-deficient design matrix");
    model.coefficients = qr.solve(y);
    return model;
}

Vec3 predict_geometric(const GeometricGazeModel& model, const QuantizedImage& img) {
    return model.predict(extract_geometric_features(img, model.dark_threshold));
}

}  // namespace ettwin::estimator
