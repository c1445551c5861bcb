#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ettwin/core/error.hpp"
#include "ettwin/core/seed.hpp"
#include "ettwin/eyescene/eyescene.hpp"

namespace ettwin::eyescene {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSpecularWeight = 0.2;
constexpr double kSpecularExponent = 200.0;
constexpr double kGlintSigmaPx = 0.7;
constexpr double kGlintGain = 10.0;
constexpr double kGlintRadiusPx = 3.0;

// Skin background plane depth and lid half-width, as fractions of the eyeball radius.
constexpr double kSkinDepth = 0.0;
constexpr double kLidHalfWidth = 1.1;

double lattice(std::uint64_t seed, long ix, long iy) {
    const auto h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                                                static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL));
    return to_unit(h);
}

// Bilinear value noise with smoothstep weights, in [0, 1).
double value_noise(std::uint64_t seed, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3.0 - 2.0 * tx);
    ty = ty * ty * (3.0 - 2.0 * ty);
    const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
    const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
    return (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
}

double fbm(std::uint64_t seed, double x, double y) {
    return 0.6 * value_noise(seed, x, y) + 0.4 * value_noise(seed + 1, 2.1 * x, 2.1 * y);
}

// Entry distance of a ray into a sphere, or +inf. The origin is outside.
double sphere_entry(const Vec3& o, const Vec3& d, const Vec3& center, double radius2) {
    const Vec3 oc = o - center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - radius2;
    const double disc = b * b - c;
    if (disc < 0.0) return kInf;
    const double t = -b - std::sqrt(disc);
    return t > 1e-9 ? t : kInf;
}

struct Light {
    Vec3 position;  // eye-relative
    double intensity;
};

// Everything in the eye-relative frame: origin at the eyeball center, device axes.
struct Scene {
    double eye_r2;
    Vec3 cornea_center;
    double cornea_r;
    double cornea_r2;
    Vec3 axis;
    Mat3 rotation;
    Vec3 iris_center;
    double pupil_r;
    double iris_r;
    double skin_z;
    double lid_half_width;
    double lid_upper;
    double lid_lower;
    const EyeModel* eye;
    std::vector<Light> lights;

    Scene(const PosedEye& posed, std::span<const Illuminant> leds, const Vec3& slip) {
        const EyeModel& e = posed.eye;
        eye = &e;
        eye_r2 = e.eyeball_radius * e.eyeball_radius;
        axis = posed.visual_axis();
        rotation = posed.rotation;
        cornea_center = e.cornea_center_offset * axis;
        cornea_r = e.cornea_radius;
        cornea_r2 = cornea_r * cornea_r;
        iris_center = posed.iris_plane_depth() * axis;
        pupil_r = e.pupil_radius;
        iris_r = e.iris_radius;
        skin_z = kSkinDepth * e.eyeball_radius;
        lid_half_width = kLidHalfWidth * e.eyeball_radius;
        lid_upper = posed.upper_aperture;
        lid_lower = e.eyelid_aperture;
        for (const auto& led : leds) lights.push_back({(led.position + slip) - e.eyeball_center, led.radiant_intensity});
    }

    bool inside_aperture(double x, double y) const {
        if (y > lid_upper || y < -lid_lower) return false;
        const double b = y >= 0.0 ? std::max(lid_upper, 1e-9) : lid_lower;
        const double u = x / lid_half_width, v = y / b;
        return u * u + v * v <= 1.0;
    }

    // True when the segment start->end crosses the skin plane.
    bool skin_blocks(const Vec3& start, const Vec3& end) const {
        return (start.z() - skin_z) * (end.z() - skin_z) < 0.0;
    }

    double diffuse(const Vec3& p, const Vec3& n) const {
        double sum = 0.0;
        for (const auto& l : lights) {
            const Vec3 to = l.position - p;
            const double d2 = to.squaredNorm();
            const double cosine = n.dot(to) / std::sqrt(d2);
            if (cosine > 0.0) sum += l.intensity * cosine / d2;
        }
        return sum;
    }

    double specular(const Vec3& p, const Vec3& n, const Vec3& view) const {
        double sum = 0.0;
        for (const auto& l : lights) {
            const Vec3 to = l.position - p;
            const double d2 = to.squaredNorm();
            const Vec3 h = (to / std::sqrt(d2) + view).normalized();
            const double c = n.dot(h);
            if (c > 0.0 && n.dot(to) > 0.0) sum += l.intensity * std::pow(c, kSpecularExponent) / d2;
        }
        return kSpecularWeight * sum;
    }

    double skin_albedo(const Vec3& p) const {
        const double x = eye->handedness * p.x();
        return eye->albedo_skin * (0.8 + 0.4 * fbm(eye->texture_seed ^ 0x5c1aULL, 0.35 * x, 0.35 * p.y()));
    }

    double sclera_albedo(const Vec3& p) const {
        const double x = eye->handedness * p.x();
        return eye->albedo_sclera * (0.92 + 0.16 * value_noise(eye->texture_seed ^ 0x5c7eULL, 0.8 * x, 0.8 * p.y()));
    }

    double iris_albedo(const Vec3& local) const {
        const double lx = eye->handedness * local.x();
        const double theta = std::atan2(local.y(), lx);
        const double rho = std::sqrt(lx * lx + local.y() * local.y());
        const double striation = value_noise(eye->texture_seed ^ 0x1415ULL, theta * (20.0 / std::numbers::pi), 1.5 * rho);
        return std::min(1.0, eye->albedo_iris * (0.7 + 0.6 * striation));
    }

    struct Shade {
        double diffuse;
        double specular;
    };

    // Radiance along one primary ray from eye-relative origin o in direction d.
    Shade trace(const Vec3& o, const Vec3& d) const {
        const double t_eye_ball = sphere_entry(o, d, Vec3::Zero(), eye_r2);
        const double t_cornea = sphere_entry(o, d, cornea_center, cornea_r2);
        const double t_eye = std::min(t_eye_ball, t_cornea);

        double t_skin = kInf;
        if (d.z() < 0.0) {
            const double t = (skin_z - o.z()) / d.z();
            if (t > 0.0) t_skin = t;
        }
        if (t_skin == kInf && t_eye == kInf) return {0.0, 0.0};
        if (t_skin < t_eye) {
            const Vec3 p = o + t_skin * d;
            return {skin_albedo(p) * diffuse(p, Vec3::UnitZ()), 0.0};
        }

        const Vec3 p = o + t_eye * d;
        const bool on_cornea = t_cornea <= t_eye_ball;
        const Vec3 n = on_cornea ? Vec3((p - cornea_center) / cornea_r) : p.normalized();
        if (!inside_aperture(p.x(), p.y())) return {skin_albedo(p) * diffuse(p, n), 0.0};
        if (!on_cornea) return {sclera_albedo(p) * diffuse(p, n), 0.0};

        const double spec = specular(p, n, -d);
        const double denom = d.dot(axis);
        if (denom < 0.0) {
            const double t_iris = (iris_center - o).dot(axis) / denom;
            const Vec3 q = o + t_iris * d;
            const Vec3 local = rotation.transpose() * (q - iris_center);
            const double rho = std::sqrt(local.x() * local.x() + local.y() * local.y());
            if (rho <= pupil_r) return {eye->albedo_pupil * diffuse(q, axis), spec};
            if (rho <= iris_r) return {iris_albedo(local) * diffuse(q, axis), spec};
        }
        return {sclera_albedo(p) * diffuse(p, n), spec};
    }

    // Reflection point on the cornea for camera at o and light at l, both eye-relative.
    std::optional<Vec3> glint(const Vec3& o, const Vec3& l) const {
        const Vec3 a = (o - cornea_center).normalized();
        const Vec3 b = (l - cornea_center).normalized();
        Vec3 n;
        if (a.cross(b).norm() < 1e-12) {
            if (a.dot(b) <= 0.0) return std::nullopt;
            n = a;
        } else {
            // The normal bisects the view and light directions; search the arc from a to b.
            const Vec3 e1 = a;
            const Vec3 e2 = (b - b.dot(a) * a).normalized();
            const Vec3 k = e1.cross(e2);
            const double phi = std::atan2(b.dot(e2), b.dot(e1));
            auto residual = [&](double theta) {
                const Vec3 nn = std::cos(theta) * e1 + std::sin(theta) * e2;
                const Vec3 p = cornea_center + cornea_r * nn;
                const Vec3 u = (o - p).normalized();
                const Vec3 w = (l - p).normalized();
                return nn.cross(u).dot(k) + nn.cross(w).dot(k);
            };
            double lo = 0.0, hi = phi;
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (residual(mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            const double theta = 0.5 * (lo + hi);
            n = std::cos(theta) * e1 + std::sin(theta) * e2;
        }
        const Vec3 p = cornea_center + cornea_r * n;

        // Must lie on the exposed cornea, inside the lid aperture.
        if (p.squaredNorm() < eye_r2) return std::nullopt;
        if (!inside_aperture(p.x(), p.y())) return std::nullopt;
        // Camera line of sight: the first hit along o -> p must be p itself.
        const Vec3 view = p - o;
        const double dist = view.norm();
        const Vec3 dir = view / dist;
        const double t_first = std::min(sphere_entry(o, dir, Vec3::Zero(), eye_r2),
                                        sphere_entry(o, dir, cornea_center, cornea_r2));
        if (t_first < dist - 1e-6 * std::max(1.0, dist)) return std::nullopt;
        if (skin_blocks(o, p)) return std::nullopt;
        // Light path.
        if (l.z() <= skin_z) return std::nullopt;
        const Vec3 to_light = l - p;
        const double light_dist = to_light.norm();
        if (sphere_entry(p, to_light / light_dist, Vec3::Zero(), eye_r2) < light_dist) return std::nullopt;
        if (skin_blocks(p, l)) return std::nullopt;
        return p;
    }
};

void check_camera(const Scene& scene, const Vec3& o) {
    if (o.squaredNorm() <= scene.eye_r2 || (o - scene.cornea_center).squaredNorm() <= scene.cornea_r2 ||
        o.z() <= scene.skin_z)
        throw Error(ErrorKind::DegenerateCamera, "degenerate camera: center lies inside the eye or behind the skin");
}

}  // namespace

LinearImage render(const PosedEye& eye, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   std::span<const Illuminant> leds, const SlippageTransform& slippage, const RenderOptions& options) {
    intrinsics.validate();
    const Vec3 slip = slippage.offset();
    const Scene scene(eye, leds, slip);
    const Vec3 o = (pose.translation + slip) - eye.eye.eyeball_center;
    check_camera(scene, o);

    const int w = intrinsics.width, h = intrinsics.height;
    const Mat3 to_device = pose.rotation.transpose();
    std::vector<double> radiance(static_cast<std::size_t>(w) * h);
    double diffuse_max = 0.0;
    for (int j = 0; j < h; ++j) {
        const double vy = (j + 0.5 - intrinsics.cy) / intrinsics.fy;
        for (int i = 0; i < w; ++i) {
            const double vx = (i + 0.5 - intrinsics.cx) / intrinsics.fx;
            const Vec3 d = to_device * Vec3(vx, vy, 1.0).normalized();
            const auto shade = scene.trace(o, d);
            diffuse_max = std::max(diffuse_max, shade.diffuse);
            radiance[static_cast<std::size_t>(j) * w + i] = shade.diffuse + (options.specular ? shade.specular : 0.0);
        }
    }

    if (options.glints && diffuse_max > 0.0) {
        const double peak = kGlintGain * diffuse_max;
        const double inv_two_sigma2 = 1.0 / (2.0 * kGlintSigmaPx * kGlintSigmaPx);
        for (const auto& light : scene.lights) {
            if (light.intensity <= 0.0) continue;
            const auto p = scene.glint(o, light.position);
            if (!p) continue;
            const Vec3 c = pose.rotation * (*p - o);
            if (!(c.z() > 1e-9)) continue;
            // Offsets from the principal point keep the splat exactly symmetric under mirroring.
            const double gx = intrinsics.fx * c.x() / c.z();
            const double gy = intrinsics.fy * c.y() / c.z();
            const int i0 = static_cast<int>(std::floor(intrinsics.cx + gx - kGlintRadiusPx - 1.0));
            const int j0 = static_cast<int>(std::floor(intrinsics.cy + gy - kGlintRadiusPx - 1.0));
            for (int j = std::max(j0, 0); j <= std::min(j0 + 2 * static_cast<int>(kGlintRadiusPx) + 3, h - 1); ++j) {
                const double dy = (j + 0.5 - intrinsics.cy) - gy;
                for (int i = std::max(i0, 0); i <= std::min(i0 + 2 * static_cast<int>(kGlintRadiusPx) + 3, w - 1); ++i) {
                    const double dx = (i + 0.5 - intrinsics.cx) - gx;
                    const double r2 = dx * dx + dy * dy;
                    if (r2 <= kGlintRadiusPx * kGlintRadiusPx)
                        radiance[static_cast<std::size_t>(j) * w + i] += peak * std::exp(-r2 * inv_two_sigma2);
                }
            }
        }
    }

    std::vector<float> values(radiance.size());
    std::transform(radiance.begin(), radiance.end(), values.begin(), [](double v) { return static_cast<float>(v); });
    return LinearImage(w, h, std::move(values));
}

std::optional<Vec3> glint_point(const PosedEye& eye, const CameraPose& pose, const Illuminant& led,
                                const SlippageTransform& slippage) {
    const Vec3 slip = slippage.offset();
    const Illuminant leds[] = {led};
    const Scene scene(eye, leds, slip);
    const Vec3 o = (pose.translation + slip) - eye.eye.eyeball_center;
    if (o.squaredNorm() <= scene.eye_r2 || (o - scene.cornea_center).squaredNorm() <= scene.cornea_r2)
        return std::nullopt;
    const Vec3 l = scene.lights.front().position;
    if (l.squaredNorm() <= scene.eye_r2 || (l - scene.cornea_center).squaredNorm() <= scene.cornea_r2)
        return std::nullopt;
    const auto p = scene.glint(o, l);
    if (!p) return std::nullopt;
    return Vec3(*p + eye.eye.eyeball_center);
}

std::vector<Vec2> glint_positions(const PosedEye& eye, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                  const Illuminant& led, const SlippageTransform& slippage) {
    const auto p = glint_point(eye, pose, led, slippage);
    if (!p) return {};
    CameraPose moved = pose;
    moved.translation = pose.translation + slippage.offset();
    const Vec3 c = moved.to_camera(*p);
    if (!(c.z() > 1e-9)) return {};
    return {Vec2(intrinsics.fx * c.x() / c.z() + intrinsics.cx, intrinsics.fy * c.y() / c.z() + intrinsics.cy)};
}

}  // namespace ettwin::eyescene
