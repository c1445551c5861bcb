#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "ettwin/core/error.hpp"
#include "ettwin/core/image.hpp"
#include "ettwin/core/metrics.hpp"
#include "ettwin/harness/harness.hpp"

using namespace ettwin;
using namespace ettwin::harness;
namespace fs = std::filesystem;

namespace {

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an ettwin::Error";
    return ErrorKind::Io;
}

std::vector<int> iota_ids(int n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ettwin_test_" + name);
    fs::remove_all(p);
    return p;
}

SweepSpec small_sweep() {
    SweepSpec s;
    s.axis = SweepAxis::BlurRadius;
    s.axis_values = {0.0, 4.0};
    s.base.identity_count = 5;
    s.base.target_count = 20;
    s.base.slippage_per_gaze = 1;
    s.trials = 2;
    return s;
}

}  // namespace

TEST(Split, PaperScale) {
    const auto ids = iota_ids(155);
    const auto s = split_identities(ids, 42);
    EXPECT_EQ(s.train.size(), 124u);
    EXPECT_EQ(s.test.size(), 31u);
}

TEST(Split, Deterministic) {
    const auto ids = iota_ids(50);
    std::set<std::vector<int>> distinct;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = split_identities(ids, seed), b = split_identities(ids, seed);
        EXPECT_EQ(a.train, b.train);
        EXPECT_EQ(a.test, b.test);
        distinct.insert(a.test);
    }
    EXPECT_EQ(distinct.size(), 10u);
}

TEST(Split, Partition) {
    const auto ids = iota_ids(23);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = split_identities(ids, seed * 7919);
        EXPECT_EQ(s.train.size(), 19u);
        std::vector<int> all = s.train;
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        EXPECT_EQ(all, ids);
    }
    EXPECT_EQ(kind_of([] { split_identities(iota_ids(4), 1); }), ErrorKind::Validation);
}

TEST(Dataset, FrameArithmetic) {
    const DatasetSpec spec;
    EXPECT_EQ(spec.frame_count(1), 2736u);
    const std::vector<int> one{3};
    const auto frames = plan_frames(spec, one);
    EXPECT_EQ(frames.size(), 2736u);
    EXPECT_EQ(frames.front().label.identity_id, 3);
    EXPECT_EQ(frames.back().label.target_index, 113);
    EXPECT_EQ(frames.back().slippage_index, 23);
    const auto three = plan_frames(spec, std::vector<int>{0, 1, 2});
    EXPECT_EQ(three.size(), spec.frame_count(3));
}

TEST(Dataset, SeedsAreIndependentPerFrame) {
    const DatasetSpec spec;
    const auto frames = plan_frames(spec, std::vector<int>{0, 1});
    std::set<std::uint64_t> noise, slip;
    for (const auto& f : frames) {
        noise.insert(f.noise_seed);
        slip.insert(f.slippage_seed);
        EXPECT_LE(std::abs(f.slippage.dx), 3.0);
        EXPECT_LE(std::abs(f.slippage.dz), 6.0);
    }
    EXPECT_EQ(noise.size(), frames.size());
    EXPECT_EQ(slip.size(), frames.size());
    // A frame does not depend on which other identities are planned with it.
    const auto alone = plan_frames(spec, std::vector<int>{1});
    EXPECT_EQ(alone.front().noise_seed, frames[2736].noise_seed);
    EXPECT_EQ(alone.front().slippage, frames[2736].slippage);
}

TEST(Dataset, BuildIsReproducible) {
    DatasetSpec spec;
    spec.target_count = 6;
    spec.slippage_per_gaze = 1;
    const std::vector<int> ids{0, 1};
    const auto a = fresh_dir("build_a"), b = fresh_dir("build_b");
    const auto m = build_dataset(spec, ids, a, {2, false, false});
    build_dataset(spec, ids, b, {1, false, false});
    EXPECT_EQ(m.frames.size(), 12u);
    for (const auto& f : m.files) EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << f;
    EXPECT_EQ(read_file_bytes(a / "manifest.json"), read_file_bytes(b / "manifest.json"));
    const auto manifest = nlohmann::json::parse(std::ifstream(a / "manifest.json"));
    EXPECT_EQ(manifest["total_frames"], 12);
    EXPECT_EQ(manifest["frames"].size(), 12u);
    EXPECT_EQ(read_pgm(a / m.files[5]).values().size(), 320u * 240u);

    EXPECT_EQ(kind_of([&] { build_dataset(spec, ids, a); }), ErrorKind::Io);
    EXPECT_NO_THROW(build_dataset(spec, ids, a, {1, true, false}));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Dataset, WriteFailureNamesPath) {
    DatasetSpec spec;
    spec.target_count = 1;
    spec.slippage_per_gaze = 1;
    const auto dir = fresh_dir("blocked");
    fs::create_directories(dir);
    std::ofstream(dir / "file") << "x";
    try {
        build_dataset(spec, std::vector<int>{0}, dir / "file" / "sub");
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
        EXPECT_NE(std::string(e.what()).find("file/sub"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(CameraAxis, FocalKeepsPose) {
    const auto base = eyescene::default_rig();
    const auto values = default_axis_values(SweepAxis::FocalLength);
    EXPECT_EQ(values, (std::vector<double>{200, 270, 300, 400, 500, 600}));
    const auto rigs = camera_axis_values(SweepAxis::FocalLength, base, values);
    ASSERT_EQ(rigs.size(), 6u);
    EXPECT_EQ(rigs[1], base);
    EXPECT_EQ(rigs[5].cameras[0].pose, base.cameras[0].pose);
    EXPECT_EQ(rigs[5].cameras[0].intrinsics.fx, 600.0);
    EXPECT_EQ(rigs[5].cameras[0].intrinsics.fy, 600.0);
}

TEST(CameraAxis, LineEndpoints) {
    const auto base = eyescene::default_rig();
    const auto values = default_axis_values(SweepAxis::CameraLineToOnAxis);
    ASSERT_EQ(values.size(), 6u);
    const auto rigs = camera_axis_values(SweepAxis::CameraLineToOnAxis, base, values);
    EXPECT_EQ(rigs.front(), base);
    const auto& end = rigs.back().cameras[0].pose;
    const Vec3 eye = base.nominal_eye_center;
    const double standoff = (base.cameras[0].pose.translation - eye).norm();
    EXPECT_LT((end.translation - (eye + Vec3(0, 0, standoff))).norm(), 1e-9);
    // Optical axis (camera +z in device coordinates) points from the camera straight back along -z.
    EXPECT_LT((end.rotation.row(2).transpose() - Vec3(0, 0, -1)).norm(), 1e-9);
    for (std::size_t k = 1; k + 1 < rigs.size(); ++k) {
        const auto& p = rigs[k].cameras[0].pose;
        const Vec3 c = p.to_camera(eye);
        EXPECT_LT(std::hypot(c.x(), c.y()), 1e-9);
        const double t = static_cast<double>(k) / 5.0;
        const Vec3 expected = base.cameras[0].pose.translation + t * (end.translation - base.cameras[0].pose.translation);
        EXPECT_LT((p.translation - expected).norm(), 1e-9);
    }
}

TEST(CameraAxis, VerticalSteps) {
    const auto base = eyescene::default_rig();
    const auto values = default_axis_values(SweepAxis::CameraOffsetVertical);
    ASSERT_EQ(values.size(), 9u);
    const auto rigs = camera_axis_values(SweepAxis::CameraOffsetVertical, base, values);
    for (std::size_t i = 0; i < rigs.size(); ++i) {
        const Vec3 d = rigs[i].cameras[0].pose.translation - base.cameras[0].pose.translation;
        EXPECT_EQ(d.x(), 0.0);
        EXPECT_EQ(d.z(), 0.0);
        EXPECT_EQ(d.y(), static_cast<double>(i) - 4.0);
        EXPECT_LT(std::hypot(rigs[i].cameras[0].pose.to_camera(base.nominal_eye_center).x(),
                             rigs[i].cameras[0].pose.to_camera(base.nominal_eye_center).y()),
                  1e-9);
    }
    EXPECT_EQ(kind_of([&] { camera_axis_values(SweepAxis::BlurRadius, base, values); }), ErrorKind::Validation);
}

TEST(Sweep, DefaultGrids) {
    EXPECT_EQ(default_axis_values(SweepAxis::BlurRadius), (std::vector<double>{0, 1, 2, 4, 8, 16, 32}));
    const auto b = default_axis_values(SweepAxis::Brightness);
    ASSERT_EQ(b.size(), 9u);
    EXPECT_NEAR(b.front(), 0.01, 1e-15);
    EXPECT_NEAR(b[4], 1.0, 1e-15);
    EXPECT_NEAR(b.back(), 100.0, 1e-12);
    const auto n = default_axis_values(SweepAxis::NoisePsnr);
    EXPECT_TRUE(std::isinf(n.front()));
    EXPECT_EQ(n.back(), 20.0);
}

TEST(Sweep, SpecValidation) {
    auto s = small_sweep();
    s.axis_values = {0.0, 4.0, 2.0};
    EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::Validation);
    s.axis_values.clear();
    EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::Validation);
    s = small_sweep();
    s.base.identity_count = 4;
    EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::Validation);
}

TEST(Sweep, PairedConfigurations) {
    auto s = small_sweep();
    const auto d = s.dataset_for(4.0);
    EXPECT_EQ(d.optics.blur_radius, 4.0);
    s.axis = SweepAxis::NoisePsnr;
    EXPECT_FALSE(s.dataset_for(INFINITY).optics.target_psnr.has_value());
    EXPECT_EQ(s.dataset_for(24.0).optics.target_psnr, 24.0);
}

TEST(Sweep, SmallestSweep) {
    SweepSpec s;
    s.axis_values = {0.0};
    s.base.identity_count = 5;
    s.base.slippage_per_gaze = 1;
    s.trials = 1;
    const auto r = run_sweep(s);
    ASSERT_EQ(r.cells.size(), 2u);
    for (const auto& c : r.cells) {
        EXPECT_LE(c.result.p50, c.result.p75);
        EXPECT_LE(c.result.p75, c.result.p95);
        EXPECT_EQ(c.train_ids.size(), 4u);
        EXPECT_EQ(c.test_ids.size(), 1u);
        EXPECT_EQ(c.result.n_frames, 114u);
        EXPECT_EQ(c.train_config, c.test_config);
    }
    ASSERT_EQ(r.summary.size(), 2u);
    EXPECT_EQ(r.summary[0].std_p95, 0.0);
}

TEST(Sweep, WorkerCountDoesNotChangeReport) {
    const auto s = small_sweep();
    const auto a = run_sweep(s, {1, {}});
    const auto b = run_sweep(s, {8, {}});
    EXPECT_EQ(a.to_csv(), b.to_csv());
    EXPECT_EQ(a.summary_json().dump(), b.summary_json().dump());
    EXPECT_EQ(a.cells.size(), 2u * 2u * 2u);

    // Aggregation matches a direct recomputation from the cells.
    for (const auto& row : a.summary) {
        std::vector<double> p95;
        for (const auto& c : a.cells)
            if (c.axis_value == row.axis_value && c.estimator == row.estimator) p95.push_back(c.result.p95);
        ASSERT_EQ(p95.size(), 2u);
        const double mean = (p95[0] + p95[1]) / 2.0;
        const double sd = std::sqrt(((p95[0] - mean) * (p95[0] - mean) + (p95[1] - mean) * (p95[1] - mean)) / 1.0);
        EXPECT_NEAR(row.mean_p95, mean, 1e-12);
        EXPECT_NEAR(row.std_p95, sd, 1e-12);
    }

    EXPECT_NEAR(correlate_trends(a, a, 95), 1.0, 1e-12);
    auto other = a;
    other.spec.axis_values = {0.0, 8.0};
    EXPECT_THROW(correlate_trends(a, other, 95), Error);

    const std::string csv = a.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "axis,axis_value,trial,estimator,p50,p75,p95,n_frames,n_failures");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    const auto svg = render_svg(std::vector<SweepReport>{a}, 95);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
}

TEST(Config, RoundTrip) {
    RunConfig cfg;
    cfg.dataset.identity_count = 7;
    cfg.dataset.optics.blur_radius = 3.5;
    cfg.dataset.optics.target_psnr = 28.0;
    cfg.sweep = small_sweep();
    cfg.sweep->axis = SweepAxis::NoisePsnr;
    cfg.sweep->axis_values = {INFINITY, 32.0, 24.0};
    cfg.sweep->base = cfg.dataset;
    const auto j = nlohmann::json::parse(to_json(cfg).dump());
    const auto back = run_config_from_json(j);
    EXPECT_EQ(back.dataset, cfg.dataset);
    ASSERT_TRUE(back.sweep.has_value());
    EXPECT_EQ(back.sweep->axis, SweepAxis::NoisePsnr);
    EXPECT_TRUE(std::isinf(back.sweep->axis_values[0]));
    EXPECT_EQ(back.sweep->axis_values[2], 24.0);
    EXPECT_EQ(back.sweep->trials, 2);
    EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
}

TEST(Config, ErrorsCarryPointer) {
    auto pointer_of = [](const nlohmann::json& j) {
        try {
            run_config_from_json(j);
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Config);
            return e.pointer();
        }
        ADD_FAILURE() << j.dump();
        return std::string();
    };
    EXPECT_EQ(pointer_of({{"spec_version", 1}, {"dataset", {{"identity_count", "many"}}}}), "/dataset/identity_count");
    EXPECT_EQ(pointer_of({{"spec_version", 1}, {"dataset", {{"bogus", 1}}}}), "/dataset/bogus");
    EXPECT_EQ(pointer_of({{"spec_version", 2}}), "/spec_version");
    EXPECT_EQ(pointer_of({{"spec_version", 1}, {"dataset", {{"optics", {{"blur_radius", -1}}}}}}),
              "/dataset/optics");
    EXPECT_EQ(pointer_of({{"spec_version", 1}, {"sweep", {{"axis", "shoe_size"}}}}), "/sweep/axis");
}
