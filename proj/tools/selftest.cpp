#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "ettwin/core/seed.hpp"
#include "ettwin/eyescene/eyescene.hpp"
#include "ettwin/optics/optics.hpp"

namespace ettwin::cli {

namespace {

struct Check {
    std::ostream& out;
    int failed = 0;

    void report(const std::string& name, bool ok, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        if (!ok) ++failed;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

LinearImage random_image(int w, int h, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<float> v(static_cast<std::size_t>(w) * h);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    return LinearImage(w, h, std::move(v));
}

double spatial_max_diff(const LinearImage& img, const optics::Kernel& k, const LinearImage& fast) {
    const int r = k.radius();
    double worst = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double s = 0.0;
            for (int ky = -r; ky <= r; ++ky)
                for (int kx = -r; kx <= r; ++kx) {
                    const int sx = x - kx, sy = y - ky;
                    if (sx < 0 || sy < 0 || sx >= img.width() || sy >= img.height()) continue;
                    s += k.at(kx + r, ky + r) * img.at(sx, sy);
                }
            worst = std::max(worst, std::abs(s - fast.at(x, y)));
        }
    return worst;
}

void check_kernels(Check& c) {
    double worst = 0.0;
    for (int r2 = 0; r2 <= 128; ++r2) worst = std::max(worst, std::abs(optics::disk_psf(r2 / 2.0).sum() - 1.0));
    c.report("disk_psf normalization", worst <= 1e-12, "max |sum - 1| = " + fmt("%.3g", worst));

    double conv = 0.0;
    for (int r = 0; r <= 4; ++r) {
        const auto img = random_image(64, 64, 77 + static_cast<std::uint64_t>(r));
        const auto k = optics::disk_psf(r);
        conv = std::max(conv, spatial_max_diff(img, k, optics::convolve(img, k)));
    }
    c.report("convolve vs spatial oracle", conv <= 1e-5, "max abs diff = " + fmt("%.3g", conv));
}

void check_quantization(Check& c) {
    int mismatches = 0;
    for (int code = 0; code < 256; ++code) {
        const float v = static_cast<float>(code) / 255.0f;
        if (optics::quantize_value(v) != code) ++mismatches;
    }
    const bool clamps = optics::quantize_value(-0.5f) == 0 && optics::quantize_value(2.0f) == 255;
    c.report("quantize round trip", mismatches == 0 && clamps,
             std::to_string(mismatches) + " of 256 codes mismatched" + (clamps ? "" : ", clamping wrong"));
}

void check_psnr(Check& c) {
    const LinearImage ref(320, 240, std::vector<float>(320 * 240, 0.5f));
    double worst = 0.0;
    for (double target : {40.0, 32.0, 28.0, 24.0, 20.0}) {
        optics::OpticsConfig cfg;
        cfg.target_psnr = target;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto p = optics::psnr(ref, optics::add_noise(ref, cfg, seed), 1.0);
            worst = std::max(worst, p ? std::abs(*p - target) : 1e9);
        }
    }
    c.report("PSNR calibration", worst <= 0.2, "max |PSNR - target| = " + fmt("%.4f", worst) + " dB");
}

// Brute force: the sphere sample whose normal best bisects the view and light directions.
Vec3 brute_force_glint(const Vec3& center, double radius, const Vec3& cam, const Vec3& led, int samples) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    double best = -2.0;
    Vec3 best_p = center;
    for (int i = 0; i < samples; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / samples;
        const double rho = std::sqrt(1.0 - z * z);
        const Vec3 n(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
        const Vec3 p = center + radius * n;
        const Vec3 h = ((cam - p).normalized() + (led - p).normalized()).normalized();
        const double score = n.dot(h);
        if (score > best) {
            best = score;
            best_p = p;
        }
    }
    return best_p;
}

void check_glints(Check& c, int rigs, int samples) {
    SplitMix64 rng(0x611a7);
    double worst = 0.0;
    int compared = 0;
    for (int attempt = 0; compared < rigs && attempt < rigs * 50; ++attempt) {
        const auto eye = eyescene::generate_identity(rng.next());
        const auto posed = eyescene::apply_gaze(
            eye, gaze_from_pitch_yaw(rng.uniform(-30, 30), rng.uniform(-30, 30)));
        const Vec3 cam_pos = eye.eyeball_center + Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(25, 45));
        eyescene::Illuminant led;
        led.position = eye.eyeball_center + Vec3(rng.uniform(-35, 35), rng.uniform(-30, 30), rng.uniform(15, 35));
        led.radiant_intensity = 1.0;
        const CameraIntrinsics k;
        const auto pose = look_at(cam_pos, eye.eyeball_center);
        const auto analytic = eyescene::glint_positions(posed, k, pose, led);
        if (analytic.empty()) continue;
        const Vec3 p = brute_force_glint(posed.cornea_center(), eye.cornea_radius, cam_pos, led.position, samples);
        worst = std::max(worst, (project(p, k, pose) - analytic.front()).norm());
        ++compared;
    }
    c.report("glint oracle", compared == rigs && worst <= 0.5,
             std::to_string(compared) + " rigs, max deviation " + fmt("%.4f", worst) + " px");
}

}  // namespace

int run_selftest(std::ostream& out) {
    Check c{out};
    check_kernels(c);
    check_quantization(c);
    check_psnr(c);
    check_glints(c, 20, 1'000'000);
    out << (c.failed == 0 ? "selftest passed" : "selftest failed: " + std::to_string(c.failed) + " check(s)") << "\n";
    return c.failed;
}

}  // namespace ettwin::cli
