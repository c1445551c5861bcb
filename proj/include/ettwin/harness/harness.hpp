#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ettwin/core/gaze.hpp"
#include "ettwin/estimator/estimator.hpp"
#include "ettwin/eyescene/eyescene.hpp"
#include "ettwin/optics/optics.hpp"

namespace ettwin::harness {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kSpecVersion = 1;

struct DatasetSpec {
    int identity_count = 50;
    std::uint64_t identity_seed_base = 1000;
    int target_count = kGazeTargetCount;
    double half_fov_deg = kGazeHalfFovDeg;
    int slippage_per_gaze = 24;
    Vec3 slippage_range = eyescene::kDefaultSlippageRange;
    eyescene::RigConfig rig = eyescene::default_rig();
    optics::OpticsConfig optics;
    std::uint64_t master_seed = 20240601;
    int camera_id = 0;

    void validate() const;
    std::size_t frame_count(std::size_t identities) const {
        return identities * static_cast<std::size_t>(target_count) * static_cast<std::size_t>(slippage_per_gaze);
    }
    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Everything needed to regenerate one frame in isolation.
struct FrameRecord {
    GazeSample label;
    int slippage_index = 0;
    eyescene::SlippageTransform slippage;
    std::uint64_t slippage_seed = 0;
    std::uint64_t noise_seed = 0;
    int camera_id = 0;
};

// Seed derivation from master_seed:
//   identity model:  derive_seed(identity_seed_base, {identity})
//   slippage sample: derive_seed(master_seed, {1, identity, target, slip})
//   sensor noise:    derive_seed(master_seed, {2, identity, target, slip})
//   trial split:     derive_seed(master_seed, {3, trial})
std::uint64_t identity_seed(const DatasetSpec& spec, int identity_id);
std::uint64_t trial_seed(const DatasetSpec& spec, int trial);
eyescene::EyeModel identity_model(const DatasetSpec& spec, int identity_id);

/// Frames in identity-major, then target, then slippage order.
std::vector<FrameRecord> plan_frames(const DatasetSpec& spec, std::span<const int> identity_ids);

/// Clean linear render of one frame (the input to the optics pipeline).
LinearImage render_frame(const DatasetSpec& spec, const FrameRecord& frame);
QuantizedImage synthesize_frame(const DatasetSpec& spec, const FrameRecord& frame);

/// Runs fn(i) for i in [0, n) on `workers` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct Manifest {
    DatasetSpec spec;
    std::vector<int> identity_ids;
    std::vector<FrameRecord> frames;
    std::vector<std::string> files;  // PGM paths relative to the dataset directory

    nlohmann::json to_json() const;
};

std::string frame_stem(const FrameRecord& frame);
nlohmann::json frame_sidecar(const FrameRecord& frame);

struct BuildOptions {
    int workers = 1;
    bool overwrite = false;
    bool write_etlf = false;  // clean linear render next to each PGM
};

/// Renders, runs the optics pipeline and writes <stem>.pgm + <stem>.json per
/// frame plus manifest.json. Write failures name the offending path.
Manifest build_dataset(const DatasetSpec& spec, std::span<const int> identity_ids, const std::filesystem::path& out_dir,
                       const BuildOptions& options = {});

/// Deterministic shuffle, first ceil(train_fraction * n) to train.
struct IdentitySplit {
    std::vector<int> train;
    std::vector<int> test;
};
IdentitySplit split_identities(std::span<const int> ids, std::uint64_t trial_seed, double train_fraction = 0.8);

enum class SweepAxis { BlurRadius, Brightness, NoisePsnr, CameraOffsetVertical, CameraLineToOnAxis, FocalLength };
enum class EstimatorKind { Ridge, Geometric };

std::string to_string(SweepAxis axis);
SweepAxis axis_from_string(const std::string& name);
std::string to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(const std::string& name);
bool is_camera_axis(SweepAxis axis);

/// Default grids: blur {0,1,2,4,8,16,32}, brightness 9 log-spaced points in
/// [0.01, 100], noise {inf,40,32,28,24,20} dB, vertical {-4..4} mm, line steps
/// {0..line_steps-1}, focal {200,270,300,400,500,600} px.
std::vector<double> default_axis_values(SweepAxis axis, int line_steps = 6);

/// Rig variants along a camera axis, re-aimed at the nominal eye center.
/// Line values are step indices in [0, line_steps).
std::vector<eyescene::RigConfig> camera_axis_values(SweepAxis axis, const eyescene::RigConfig& base,
                                                    std::span<const double> values, int camera_id = 0,
                                                    int line_steps = 6);

struct SweepSpec {
    SweepAxis axis = SweepAxis::BlurRadius;
    std::vector<double> axis_values;
    DatasetSpec base;
    int trials = 3;
    double train_fraction = 0.8;  // 4:1
    std::vector<EstimatorKind> estimators{EstimatorKind::Ridge, EstimatorKind::Geometric};
    double ridge_lambda = estimator::kDefaultRidgeLambda;
    estimator::FeatureGrid grid;
    double dark_threshold = estimator::kDefaultDarkThreshold;
    int line_steps = 6;

    void validate() const;
    /// Dataset for one axis value; train and test sets of a cell both use it.
    DatasetSpec dataset_for(double axis_value) const;
};

struct SweepCell {
    double axis_value = 0.0;
    int trial = 0;
    EstimatorKind estimator = EstimatorKind::Ridge;
    estimator::EvalResult result;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
    std::string train_config;  // dumped DatasetSpec the train frames came from
    std::string test_config;
};

struct SweepSummaryRow {
    double axis_value = 0.0;
    EstimatorKind estimator = EstimatorKind::Ridge;
    double mean_p50 = 0.0, std_p50 = 0.0;
    double mean_p75 = 0.0, std_p75 = 0.0;
    double mean_p95 = 0.0, std_p95 = 0.0;
};

struct SweepReport {
    SweepSpec spec;
    std::vector<SweepCell> cells;
    std::vector<SweepSummaryRow> summary;
    std::string artifact_version = kArtifactVersion;

    /// Per-axis-value mean of one percentile (50, 75 or 95) for one estimator.
    std::vector<double> mean_curve(EstimatorKind estimator, int percentile) const;
    std::string to_csv() const;
    nlohmann::json summary_json() const;
};

/// Mean and sample standard deviation of p50/p75/p95 across trials.
std::vector<SweepSummaryRow> aggregate(std::span<const SweepCell> cells, std::span<const double> axis_values,
                                       std::span<const EstimatorKind> estimators);

struct RunOptions {
    int workers = 1;
    std::function<void(const std::string&)> log;
};

SweepReport run_sweep(const SweepSpec& spec, const RunOptions& options = {});

/// Pearson r between the per-axis-value mean curves of two reports.
double correlate_trends(const SweepReport& a, const SweepReport& b, int percentile,
                        EstimatorKind estimator_a = EstimatorKind::Ridge,
                        EstimatorKind estimator_b = EstimatorKind::Ridge);

/// Standalone SVG line plot of mean +- std for one percentile.
std::string render_svg(std::span<const SweepReport> reports, int percentile);

// JSON config documents. Parse errors carry the JSON pointer of the offending element.
nlohmann::json to_json(const eyescene::EyeModel& eye);
eyescene::EyeModel eye_model_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const eyescene::RigConfig& rig);
eyescene::RigConfig rig_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const optics::OpticsConfig& cfg);
optics::OpticsConfig optics_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const SweepSpec& spec);
SweepSpec sweep_from_json(const nlohmann::json& j, const std::string& pointer = "");

/// Top-level document: {"spec_version": 1, "dataset": {...}, "sweep": {...}}.
struct RunConfig {
    DatasetSpec dataset;
    std::optional<SweepSpec> sweep;
};
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

}  // namespace ettwin::harness
