#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "ettwin/core/gaze.hpp"
#include "ettwin/core/geometry.hpp"
#include "ettwin/core/image.hpp"

namespace ettwin::estimator {

struct FeatureGrid {
    int height = 30;
    int width = 40;

    int dimension() const { return height * width; }
    friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

/// Box-average downsample to the grid, codes scaled to [0, 1]. No bias term.
/// Block (r, c) spans rows [r*H/h, (r+1)*H/h) and columns [c*W/w, (c+1)*W/w).
std::vector<float> block_means(const QuantizedImage& img, const FeatureGrid& grid);

struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

/// Block means, standardized with `norm` when given, with a trailing bias of 1.
Eigen::VectorXd featurize(const QuantizedImage& img, const FeatureGrid& grid, const Normalization* norm = nullptr);

/// Chosen by 5-fold identity-grouped cross-validation on the default
/// configuration over {10^k, 3*10^k}, then frozen across sweeps.
inline constexpr double kDefaultRidgeLambda = 1e4;

/// Linear map from standardized appearance features to a gaze 3-vector.
struct RidgeGazeModel {
    Eigen::MatrixXd weights;  // (D+1) x 3, bias row last
    FeatureGrid grid;
    double lambda = kDefaultRidgeLambda;
    Normalization normalization;

    int dimension() const { return grid.dimension(); }
    /// Standardizes raw block means (D entries) and appends the bias.
    Eigen::VectorXd standardize(std::span<const float> raw) const;
    /// Unit gaze from raw block means. Throws DegeneratePrediction on a ~zero output.
    Vec3 predict_raw(std::span<const float> raw) const;

    nlohmann::json to_json() const;
    static RidgeGazeModel from_json(const nlohmann::json& j);
};

/// Ridge fit on raw (unstandardized) features, N x (D+1) with the bias in the
/// last column. Features are standardized with training statistics; constant
/// features get std 1 and so contribute an all-zero column. The bias is not
/// penalized. lambda == 0 uses a rank-revealing QR and throws IllConditioned
/// when the system is singular.
RidgeGazeModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::MatrixXd& gazes, double lambda,
                         const FeatureGrid& grid = {});

Vec3 predict(const RidgeGazeModel& model, const QuantizedImage& img);

inline constexpr double kDefaultDarkThreshold = 0.05;
inline constexpr int kGlintCode = 250;
inline constexpr double kGlintSearchRadiusPx = 60.0;

/// Centroid (pixel-center coordinates) of the largest 4-connected component of
/// pixels at or below the `dark_threshold` intensity quantile. Throws NoPupil
/// when the image is constant or fully saturated.
Vec2 pupil_centroid(const QuantizedImage& img, double dark_threshold = kDefaultDarkThreshold);

/// Centroid of near-saturated pixels within kGlintSearchRadiusPx of `pupil`.
std::optional<Vec2> glint_centroid(const QuantizedImage& img, const Vec2& pupil);

struct GeometricFeatures {
    Vec2 pupil = Vec2::Zero();
    std::optional<Vec2> glint_offset;  // glint centroid - pupil centroid
};

GeometricFeatures extract_geometric_features(const QuantizedImage& img, double dark_threshold = kDefaultDarkThreshold);

/// Degree-2 polynomial regression from pupil centroid (and pupil-glint offset)
/// to (pitch, yaw).
struct GeometricGazeModel {
    static constexpr int kDegree = 2;
    bool use_glints = true;
    double dark_threshold = kDefaultDarkThreshold;
    Eigen::MatrixXd coefficients;  // terms x 2 (pitch, yaw)
    Vec2 mean_glint_offset = Vec2::Zero();

    static int term_count(bool use_glints) { return use_glints ? 11 : 6; }
    Eigen::VectorXd terms(const GeometricFeatures& f) const;
    Vec3 predict(const GeometricFeatures& f) const;

    nlohmann::json to_json() const;
    static GeometricGazeModel from_json(const nlohmann::json& j);
};

inline constexpr int kMinGeometricSamples = 12;

GeometricGazeModel fit_geometric(std::span<const GeometricFeatures> features, std::span<const Vec2> pitch_yaw,
                                 bool use_glints = true, double dark_threshold = kDefaultDarkThreshold);
Vec3 predict_geometric(const GeometricGazeModel& model, const QuantizedImage& img);

struct EvalResult {
    std::vector<double> errors;  // degrees, one per test frame
    double p50 = 0.0;
    double p75 = 0.0;
    double p95 = 0.0;
    int trial_id = 0;
    std::size_t n_frames = 0;
    std::size_t n_failures = 0;
};

inline constexpr double kFailurePenaltyDeg = 180.0;

/// Prediction for test frame i; may throw ettwin::Error, which is scored as a failure.
using FramePredictor = std::function<Vec3(std::size_t)>;

/// Per-frame angular error with nearest-rank percentiles. Frames whose
/// prediction fails score kFailurePenaltyDeg. Throws ContaminatedSplit when a
/// test identity also appears in `train_identities`.
EvalResult evaluate(const FramePredictor& predict, std::span<const GazeSample> test_labels,
                    std::span<const int> train_identities, int trial_id = 0);

}  // namespace ettwin::estimator
