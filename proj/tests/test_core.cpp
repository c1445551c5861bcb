#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "ettwin/core/error.hpp"
#include "ettwin/core/gaze.hpp"
#include "ettwin/core/geometry.hpp"
#include "ettwin/core/image.hpp"
#include "ettwin/core/metrics.hpp"
#include "ettwin/core/seed.hpp"

using namespace ettwin;

namespace {

CameraPose identity_pose() { return CameraPose{Mat3::Identity(), Vec3::Zero()}; }

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

}  // namespace

TEST(Project, OpticalAxisMapsToPrincipalPoint) {
    for (double fx : {100.0, 270.0, 600.0}) {
        CameraIntrinsics k;
        k.fx = k.fy = fx;
        const Vec2 p = project(Vec3(0, 0, 100), k, identity_pose());
        EXPECT_DOUBLE_EQ(p.x(), k.cx);
        EXPECT_DOUBLE_EQ(p.y(), k.cy);
    }
}

TEST(Project, OffAxisPoint) {
    const CameraIntrinsics k;
    const Vec2 p = project(Vec3(10, 0, 100), k, identity_pose());
    EXPECT_NEAR(p.x(), 187.0, 1e-12);
    EXPECT_NEAR(p.y(), k.cy, 1e-12);
}

TEST(Project, BehindCameraThrows) {
    EXPECT_EQ(kind_of([] { project(Vec3(0, 0, -5), CameraIntrinsics{}, identity_pose()); }), ErrorKind::BehindCamera);
    EXPECT_EQ(kind_of([] { project(Vec3(1, 1, 0), CameraIntrinsics{}, identity_pose()); }), ErrorKind::BehindCamera);
}

TEST(Project, ScaleInvariantAlongRay) {
    const CameraIntrinsics k;
    SplitMix64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(1, 100));
        const double lambda = rng.uniform(0.1, 10);
        EXPECT_LT((project(lambda * p, k, identity_pose()) - project(p, k, identity_pose())).norm(), 1e-9);
    }
}

TEST(Project, UsesPoseTranslationAndRotation) {
    const CameraPose pose = look_at(Vec3(0, 0, 50), Vec3(0, 0, 0));
    const Vec2 center = project(Vec3(0, 0, 0), CameraIntrinsics{}, pose);
    EXPECT_NEAR(center.x(), 160.0, 1e-9);
    EXPECT_NEAR(center.y(), 120.0, 1e-9);
    // Camera y points down, so a point above the target projects above the center.
    EXPECT_LT(project(Vec3(0, 5, 0), CameraIntrinsics{}, pose).y(), 120.0);
}

TEST(CameraIntrinsics, ValidateRejectsBadValues) {
    CameraIntrinsics k;
    k.fx = 0;
    EXPECT_EQ(kind_of([&] { k.validate(); }), ErrorKind::Validation);
    k = CameraIntrinsics{};
    k.cx = 320;
    EXPECT_EQ(kind_of([&] { k.validate(); }), ErrorKind::Validation);
}

TEST(CameraPose, LookAtIsProperRotation) {
    const CameraPose pose = look_at(Vec3(-6, -9, 33), Vec3(-32, 0, 0));
    const Mat3& r = pose.rotation;
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_NO_THROW(pose.validate());
    CameraPose bad = pose;
    bad.rotation.col(0) *= -1.0;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::Validation);
}

TEST(AngularError, Examples) {
    EXPECT_DOUBLE_EQ(angular_error(Vec3(0, 0, 1), Vec3(0, 0, 1)), 0.0);
    EXPECT_NEAR(angular_error(Vec3(0, 0, 1), Vec3(0, 1, 0)), 90.0, 1e-12);
    const double one = std::numbers::pi / 180.0;
    EXPECT_NEAR(angular_error(Vec3(0, 0, 1), Vec3(0, std::sin(one), std::cos(one))), 1.0, 1e-9);
    EXPECT_NEAR(angular_error(Vec3(0, 0, 1), Vec3(0, 0, -1)), 180.0, 1e-12);
}

TEST(AngularError, SymmetricAndRejectsNonUnit) {
    SplitMix64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
        const Vec3 b = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
        EXPECT_EQ(angular_error(a, b), angular_error(b, a));
        EXPECT_EQ(angular_error(a, a), 0.0);
    }
    EXPECT_EQ(kind_of([] { angular_error(Vec3(0, 0, 1.01), Vec3(0, 0, 1)); }), ErrorKind::Validation);
}

TEST(Percentile, Examples) {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    EXPECT_EQ(percentile(v, 95), 95.0);
    const std::vector<double> four{4, 3, 2, 1};
    EXPECT_EQ(percentile(four, 50), 2.0);
    const std::vector<double> one{7};
    for (double p : {0.5, 50.0, 100.0}) EXPECT_EQ(percentile(one, p), 7.0);
    EXPECT_EQ(kind_of([] { percentile(std::vector<double>{}, 50); }), ErrorKind::EmptyInput);
}

TEST(Percentile, MonotoneInPAndMaxAtHundred) {
    SplitMix64 rng(5);
    std::vector<double> v(37);
    for (auto& x : v) x = rng.uniform(-5, 5);
    double prev = -1e9;
    for (double p = 1; p <= 100; p += 1) {
        const double q = percentile(v, p);
        EXPECT_GE(q, prev);
        prev = q;
    }
    EXPECT_EQ(percentile(v, 100), *std::max_element(v.begin(), v.end()));
}

TEST(PearsonR, Examples) {
    EXPECT_NEAR(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-12);
    EXPECT_NEAR(pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-12);
    // Closed form: cov = 4, var = 5 for both series, r = 4/5.
    EXPECT_NEAR(pearson_r(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-12);
}

TEST(PearsonR, DegenerateAndAffineInvariance) {
    EXPECT_EQ(kind_of([] { pearson_r(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }),
              ErrorKind::DegenerateSeries);
    EXPECT_EQ(kind_of([] { pearson_r(std::vector<double>{1}, std::vector<double>{1}); }), ErrorKind::Validation);
    SplitMix64 rng(11);
    std::vector<double> x(50), y(50), z(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(0, 10);
        y[i] = x[i] + rng.uniform(-3, 3);
        z[i] = 3.5 * x[i] + 100.0;
    }
    EXPECT_LT(std::abs(pearson_r(x, y) - pearson_r(z, y)), 1e-9);
}

TEST(Seed, DeriveIsDeterministicAndDistinct) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Seed, CounterNormalMoments) {
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = counter_normal(77, static_cast<std::uint64_t>(i));
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
    EXPECT_EQ(counter_normal(77, 5), counter_normal(77, 5));
}

TEST(GazeSample, Validation) {
    GazeSample ok{Vec3(0, 0, 1), 0, 0};
    EXPECT_NO_THROW(ok.validate());
    GazeSample far{gaze_from_pitch_yaw(0.0, 40.0), 3, 0};
    EXPECT_EQ(kind_of([&] { far.validate(); }), ErrorKind::Validation);
    GazeSample bad_index{Vec3(0, 0, 1), 114, 0};
    EXPECT_EQ(kind_of([&] { bad_index.validate(); }), ErrorKind::Validation);
}

TEST(Gaze, PitchYawRoundTrip) {
    for (double p : {-35.0, 0.0, 17.0})
        for (double y : {-30.0, 0.0, 12.5}) {
            const Vec3 g = gaze_from_pitch_yaw(p, y);
            EXPECT_NEAR(g.norm(), 1.0, 1e-15);
            const Vec2 py = pitch_yaw_from_gaze(g);
            EXPECT_NEAR(py.x(), p, 1e-12);
            EXPECT_NEAR(py.y(), y, 1e-12);
        }
    EXPECT_LT((gaze_from_pitch_yaw(0.0, 0.0) - Vec3(0, 0, 1)).norm(), 1e-15);
}

TEST(Image, EtlfRoundTripAndLayout) {
    LinearImage img(3, 2, std::vector<float>{0.0f, 0.5f, 1.0f, 2.0f, 1e-3f, 7.25f});
    const auto bytes = encode_etlf(img);
    ASSERT_EQ(bytes.size(), 12u + 6u * 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ETLF");
    EXPECT_EQ(bytes[4], 3);
    EXPECT_EQ(bytes[8], 2);
    const auto back = decode_etlf(bytes);
    EXPECT_TRUE(back == img);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_EQ(kind_of([&] { decode_etlf(truncated); }), ErrorKind::Io);
}

TEST(Image, PgmRoundTrip) {
    QuantizedImage img(4, 3, std::vector<std::uint8_t>{0, 1, 2, 3, 4, 5, 6, 7, 250, 251, 254, 255});
    const auto bytes = encode_pgm(img);
    const std::string head(bytes.begin(), bytes.begin() + 2);
    EXPECT_EQ(head, "P5");
    EXPECT_TRUE(decode_pgm(bytes) == img);
    const auto path = std::filesystem::temp_directory_path() / "ettwin_test_roundtrip.pgm";
    write_pgm(path, img);
    EXPECT_TRUE(read_pgm(path) == img);
    std::filesystem::remove(path);
}

TEST(Image, SizeMismatchRejected) {
    EXPECT_EQ(kind_of([] { LinearImage(2, 2, std::vector<float>{1, 2, 3}); }), ErrorKind::Validation);
    EXPECT_EQ(kind_of([] { QuantizedImage(0, 2); }), ErrorKind::Validation);
}

TEST(Image, IrradianceValidity) {
    LinearImage img(2, 1, std::vector<float>{0.0f, 1.0f});
    EXPECT_TRUE(img.is_valid_irradiance());
    img.at(0, 0) = -0.1f;
    EXPECT_FALSE(img.is_valid_irradiance());
    img.at(0, 0) = std::nanf("");
    EXPECT_FALSE(img.is_valid_irradiance());
}

TEST(Error, KindStrings) {
    EXPECT_EQ(to_string(ErrorKind::ContaminatedSplit), "contaminated_split");
    const Error e(ErrorKind::Config, "bad", "/a/b");
    EXPECT_EQ(e.pointer(), "/a/b");
    EXPECT_EQ(e.kind(), ErrorKind::Config);
}
