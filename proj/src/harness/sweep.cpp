#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "ettwin/core/error.hpp"
#include "ettwin/core/metrics.hpp"
#include "ettwin/harness/harness.hpp"

namespace ettwin::harness {

namespace {

struct FrameFeatures {
    std::vector<float> appearance;
    std::optional<estimator::GeometricFeatures> geometric;
};

FrameFeatures extract(const QuantizedImage& img, const SweepSpec& spec) {
    FrameFeatures f;
    f.appearance = estimator::block_means(img, spec.grid);
    try {
        f.geometric = estimator::extract_geometric_features(img, spec.dark_threshold);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoPupil) throw;
    }
    return f;
}

double sample_std(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

estimator::EvalResult run_estimator(EstimatorKind kind, const SweepSpec& spec, std::span<const FrameRecord> frames,
                                    std::span<const FrameFeatures> features, const IdentitySplit& split, int trial) {
    std::vector<char> in_train(frames.size(), 0);
    {
        const std::set<int> train(split.train.begin(), split.train.end());
        for (std::size_t i = 0; i < frames.size(); ++i) in_train[i] = train.contains(frames[i].label.identity_id);
    }
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < frames.size(); ++i) (in_train[i] ? train_idx : test_idx).push_back(i);
    std::vector<GazeSample> test_labels;
    test_labels.reserve(test_idx.size());
    for (auto i : test_idx) test_labels.push_back(frames[i].label);

    if (kind == EstimatorKind::Ridge) {
        const int d = spec.grid.dimension();
        Eigen::MatrixXd x(static_cast<Eigen::Index>(train_idx.size()), d + 1);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(train_idx.size()), 3);
        for (std::size_t r = 0; r < train_idx.size(); ++r) {
            const auto& a = features[train_idx[r]].appearance;
            for (int c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), c) = a[static_cast<std::size_t>(c)];
            x(static_cast<Eigen::Index>(r), d) = 1.0;
            y.row(static_cast<Eigen::Index>(r)) = frames[train_idx[r]].label.gaze.transpose();
        }
        const auto model = estimator::fit_ridge(x, y, spec.ridge_lambda, spec.grid);
        return estimator::evaluate(
            [&](std::size_t i) { return model.predict_raw(features[test_idx[i]].appearance); }, test_labels,
            split.train, trial);
    }

    std::vector<estimator::GeometricFeatures> gf;
    std::vector<Vec2> py;
    for (auto i : train_idx) {
        if (!features[i].geometric) continue;
        gf.push_back(*features[i].geometric);
        py.push_back(pitch_yaw_from_gaze(frames[i].label.gaze));
    }
    // Glint terms are dropped when heavy blur or occlusion leaves too few glints to fit them.
    const auto with_glint = std::count_if(gf.begin(), gf.end(), [](const auto& g) { return g.glint_offset.has_value(); });
    std::optional<estimator::GeometricGazeModel> fitted;
    if (with_glint >= estimator::kMinGeometricSamples) {
        try {
            fitted = estimator::fit_geometric(gf, py, true, spec.dark_threshold);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::IllConditioned) throw;
        }
    }
    if (!fitted) fitted = estimator::fit_geometric(gf, py, false, spec.dark_threshold);
    const auto& model = *fitted;
    return estimator::evaluate(
        [&](std::size_t i) -> Vec3 {
            const auto& g = features[test_idx[i]].geometric;
            if (!g) throw Error(ErrorKind::NoPupil, "no pupil found");
            return model.predict(*g);
        },
        test_labels, split.train, trial);
}

}  // namespace

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::BlurRadius: return "blur_radius";
        case SweepAxis::Brightness: return "brightness";
        case SweepAxis::NoisePsnr: return "noise_psnr";
        case SweepAxis::CameraOffsetVertical: return "camera_offset_vertical";
        case SweepAxis::CameraLineToOnAxis: return "camera_line_to_onaxis";
        case SweepAxis::FocalLength: return "focal_length";
    }
    return "unknown";
}

SweepAxis axis_from_string(const std::string& name) {
    for (auto a : {SweepAxis::BlurRadius, SweepAxis::Brightness, SweepAxis::NoisePsnr, SweepAxis::CameraOffsetVertical,
                   SweepAxis::CameraLineToOnAxis, SweepAxis::FocalLength})
        if (to_string(a) == name) return a;
    throw Error(ErrorKind::Config, "unknown sweep axis '" + name + "'");
}

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::Ridge ? "ridge" : "geometric"; }

EstimatorKind estimator_from_string(const std::string& name) {
    if (name == "ridge") return EstimatorKind::Ridge;
    if (name == "geometric") return EstimatorKind::Geometric;
    throw Error(ErrorKind::Config, "unknown estimator '" + name + "'");
}

bool is_camera_axis(SweepAxis axis) {
    return axis == SweepAxis::CameraOffsetVertical || axis == SweepAxis::CameraLineToOnAxis ||
           axis == SweepAxis::FocalLength;
}

std::vector<double> default_axis_values(SweepAxis axis, int line_steps) {
    switch (axis) {
        case SweepAxis::BlurRadius: return {0, 1, 2, 4, 8, 16, 32};
        case SweepAxis::Brightness: {
            std::vector<double> v;
            for (int k = 0; k < 9; ++k) v.push_back(std::pow(10.0, -2.0 + 0.5 * k));
            return v;
        }
        case SweepAxis::NoisePsnr: return {std::numeric_limits<double>::infinity(), 40, 32, 28, 24, 20};
        case SweepAxis::CameraOffsetVertical: return {-4, -3, -2, -1, 0, 1, 2, 3, 4};
        case SweepAxis::CameraLineToOnAxis: {
            std::vector<double> v;
            for (int k = 0; k < line_steps; ++k) v.push_back(k);
            return v;
        }
        case SweepAxis::FocalLength: return {200, 270, 300, 400, 500, 600};
    }
    return {};
}

std::vector<eyescene::RigConfig> camera_axis_values(SweepAxis axis, const eyescene::RigConfig& base,
                                                    std::span<const double> values, int camera_id, int line_steps) {
    if (!is_camera_axis(axis)) throw Error(ErrorKind::Validation, "not a camera axis: " + to_string(axis));
    if (axis == SweepAxis::CameraLineToOnAxis && line_steps < 2)
        throw Error(ErrorKind::Validation, "line_steps must be >= 2");
    const Vec3 eye = base.nominal_eye_center;
    const auto& nominal = base.camera(camera_id);
    std::vector<eyescene::RigConfig> out;
    for (double v : values) {
        eyescene::RigConfig rig = base;
        auto cam = std::find_if(rig.cameras.begin(), rig.cameras.end(), [&](const auto& c) { return c.id == camera_id; });
        switch (axis) {
            case SweepAxis::CameraOffsetVertical:
                cam->pose = look_at(nominal.pose.translation + Vec3(0.0, v, 0.0), eye);
                break;
            case SweepAxis::CameraLineToOnAxis: {
                const int k = static_cast<int>(std::lround(v));
                if (k < 0 || k >= line_steps || static_cast<double>(k) != v)
                    throw Error(ErrorKind::Validation, "line step must be an integer in [0, line_steps)");
                if (k == 0) break;
                const Vec3 start = nominal.pose.translation;
                const Vec3 end = eye + Vec3(0.0, 0.0, (start - eye).norm());
                const double t = static_cast<double>(k) / (line_steps - 1);
                cam->pose = look_at(k == line_steps - 1 ? end : Vec3(start + t * (end - start)), eye);
                break;
            }
            case SweepAxis::FocalLength:
                cam->intrinsics.fx = v;
                cam->intrinsics.fy = v;
                break;
            default: break;
        }
        out.push_back(std::move(rig));
    }
    return out;
}

void SweepSpec::validate() const {
    base.validate();
    if (axis_values.empty()) throw Error(ErrorKind::Validation, "axis_values must not be empty");
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < axis_values.size(); ++i) {
        inc = inc && axis_values[i] > axis_values[i - 1];
        dec = dec && axis_values[i] < axis_values[i - 1];
    }
    if (axis_values.size() > 1 && !inc && !dec) throw Error(ErrorKind::Validation, "axis_values must be strictly monotone");
    if (trials < 1) throw Error(ErrorKind::Validation, "trials must be >= 1");
    if (estimators.empty()) throw Error(ErrorKind::Validation, "at least one estimator is required");
    if (!(ridge_lambda >= 0.0)) throw Error(ErrorKind::Validation, "ridge_lambda must be >= 0");
    for (double v : axis_values) dataset_for(v).validate();
}

DatasetSpec SweepSpec::dataset_for(double v) const {
    DatasetSpec d = base;
    switch (axis) {
        case SweepAxis::BlurRadius: d.optics.blur_radius = v; break;
        case SweepAxis::Brightness: d.optics.brightness = v; break;
        case SweepAxis::NoisePsnr:
            if (std::isinf(v)) {
                d.optics.target_psnr.reset();
                d.optics.read_sigma = 0.0;
                d.optics.shot_gain = 0.0;
            } else {
                d.optics.target_psnr = v;
            }
            break;
        default: {
            const double values[] = {v};
            d.rig = camera_axis_values(axis, base.rig, values, base.camera_id, line_steps).front();
        }
    }
    return d;
}

std::vector<SweepSummaryRow> aggregate(std::span<const SweepCell> cells, std::span<const double> axis_values,
                                       std::span<const EstimatorKind> estimators) {
    std::vector<SweepSummaryRow> rows;
    for (double v : axis_values) {
        for (auto est : estimators) {
            std::vector<double> p50, p75, p95;
            for (const auto& c : cells)
                if (c.estimator == est && (c.axis_value == v || (std::isinf(v) && std::isinf(c.axis_value)))) {
                    p50.push_back(c.result.p50);
                    p75.push_back(c.result.p75);
                    p95.push_back(c.result.p95);
                }
            if (p50.empty()) throw Error(ErrorKind::Validation, "sweep report is missing a cell");
            auto mean = [](const std::vector<double>& xs) {
                double s = 0.0;
                for (double x : xs) s += x;
                return s / static_cast<double>(xs.size());
            };
            SweepSummaryRow r;
            r.axis_value = v;
            r.estimator = est;
            r.mean_p50 = mean(p50);
            r.std_p50 = sample_std(p50, r.mean_p50);
            r.mean_p75 = mean(p75);
            r.std_p75 = sample_std(p75, r.mean_p75);
            r.mean_p95 = mean(p95);
            r.std_p95 = sample_std(p95, r.mean_p95);
            rows.push_back(r);
        }
    }
    return rows;
}

SweepReport run_sweep(const SweepSpec& spec, const RunOptions& options) {
    spec.validate();
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };
    std::vector<int> ids(static_cast<std::size_t>(spec.base.identity_count));
    std::iota(ids.begin(), ids.end(), 0);
    // Frame plans depend only on seeds and targets, never on the swept variable.
    const auto frames = plan_frames(spec.base, ids);
    const std::size_t n_values = spec.axis_values.size();
    std::vector<std::vector<FrameFeatures>> features(n_values, std::vector<FrameFeatures>(frames.size()));
    std::vector<DatasetSpec> datasets;
    for (double v : spec.axis_values) datasets.push_back(spec.dataset_for(v));

    if (!is_camera_axis(spec.axis)) {
        // Optical axes share the clean render; only the pipeline differs per value.
        log("rendering " + std::to_string(frames.size()) + " frames for " + std::to_string(n_values) + " optics settings");
        parallel_for(frames.size(), options.workers, [&](std::size_t i) {
            const LinearImage clean = render_frame(spec.base, frames[i]);
            for (std::size_t k = 0; k < n_values; ++k)
                features[k][i] = extract(optics::apply_pipeline(clean, datasets[k].optics, frames[i].noise_seed), spec);
        });
    } else {
        for (std::size_t k = 0; k < n_values; ++k) {
            log("rendering " + std::to_string(frames.size()) + " frames for " + to_string(spec.axis) + " = " +
                std::to_string(spec.axis_values[k]));
            parallel_for(frames.size(), options.workers, [&](std::size_t i) {
                features[k][i] = extract(synthesize_frame(datasets[k], frames[i]), spec);
            });
        }
    }

    SweepReport report;
    report.spec = spec;
    for (std::size_t k = 0; k < n_values; ++k) {
        const std::string config = to_json(datasets[k]).dump();
        for (int t = 0; t < spec.trials; ++t) {
            const auto split = split_identities(ids, trial_seed(spec.base, t), spec.train_fraction);
            for (auto est : spec.estimators) {
                SweepCell cell;
                cell.axis_value = spec.axis_values[k];
                cell.trial = t;
                cell.estimator = est;
                cell.train_ids = split.train;
                cell.test_ids = split.test;
                cell.train_config = config;
                cell.test_config = config;
                try {
                    cell.result = run_estimator(est, spec, frames, features[k], split, t);
                } catch (const Error& e) {
                    throw Error(e.kind(), "sweep cell (" + to_string(spec.axis) + "=" + std::to_string(cell.axis_value) +
                                              ", trial " + std::to_string(t) + ", " + to_string(est) + ") failed: " + e.what());
                }
                log(to_string(spec.axis) + "=" + std::to_string(cell.axis_value) + " trial " + std::to_string(t) + " " +
                    to_string(est) + ": p50 " + std::to_string(cell.result.p50) + " p95 " + std::to_string(cell.result.p95));
                report.cells.push_back(std::move(cell));
            }
        }
    }
    report.summary = aggregate(report.cells, spec.axis_values, spec.estimators);
    return report;
}

std::vector<double> SweepReport::mean_curve(EstimatorKind estimator, int percentile) const {
    std::vector<double> out;
    for (const auto& row : summary) {
        if (row.estimator != estimator) continue;
        switch (percentile) {
            case 50: out.push_back(row.mean_p50); break;
            case 75: out.push_back(row.mean_p75); break;
            case 95: out.push_back(row.mean_p95); break;
            default: throw Error(ErrorKind::Validation, "percentile must be 50, 75 or 95");
        }
    }
    return out;
}

double correlate_trends(const SweepReport& a, const SweepReport& b, int percentile, EstimatorKind estimator_a,
                        EstimatorKind estimator_b) {
    const auto& va = a.spec.axis_values;
    const auto& vb = b.spec.axis_values;
    const bool same = a.spec.axis == b.spec.axis && va.size() == vb.size() &&
                      std::equal(va.begin(), va.end(), vb.begin(),
                                 [](double x, double y) { return x == y || (std::isinf(x) && std::isinf(y) && x == y); });
    if (!same) throw Error(ErrorKind::Validation, "reports have mismatched sweep axes");
    const auto ca = a.mean_curve(estimator_a, percentile);
    const auto cb = b.mean_curve(estimator_b, percentile);
    return pearson_r(ca, cb);
}

}  // namespace ettwin::harness
