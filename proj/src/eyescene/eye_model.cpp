#include <algorithm>
#include <cmath>
#include <numbers>

#include "ettwin/core/error.hpp"
#include "ettwin/core/seed.hpp"
#include "ettwin/eyescene/eyescene.hpp"

namespace ettwin::eyescene {

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// Rest frame -> device frame rotation taking +z to `gaze`: yaw about y after pitch about x.
Mat3 gaze_rotation(const Vec3& gaze) {
    const double cp = std::sqrt(gaze.x() * gaze.x() + gaze.z() * gaze.z());
    const double sp = gaze.y();
    double sy = 0.0, cy = 1.0;
    if (cp > 0.0) {
        sy = gaze.x() / cp;
        cy = gaze.z() / cp;
    }
    Mat3 r;
    r.col(0) = Vec3(cy, 0.0, -sy);
    r.col(1) = Vec3(-sp * sy, cp, -sp * cy);
    r.col(2) = Vec3(cp * sy, sp, cp * cy);
    return r;
}

PosedEye pose_with_rotation(const EyeModel& eye, const Mat3& rotation) {
    PosedEye posed;
    posed.eye = eye;
    posed.rotation = rotation;
    const double pitch_deg = std::asin(std::clamp(rotation(1, 2), -1.0, 1.0)) / kRad;
    const double drop = kLidDropPerDegree * std::max(0.0, -pitch_deg);
    posed.upper_aperture = std::max(eye.eyelid_aperture - drop, 1.0 - eye.eyelid_aperture);
    return posed;
}

}  // namespace

void EyeModel::validate() const {
    if (!eyeball_center.allFinite()) throw Error(ErrorKind::Validation, "eyeball_center is not finite");
    if (!(pupil_radius > 0.0 && pupil_radius < iris_radius && iris_radius < eyeball_radius))
        throw Error(ErrorKind::Validation, "need 0 < pupil_radius < iris_radius < eyeball_radius");
    if (!(cornea_radius > 0.0 && cornea_radius < eyeball_radius))
        throw Error(ErrorKind::Validation, "need 0 < cornea_radius < eyeball_radius");
    if (!(cornea_center_offset + cornea_radius > eyeball_radius))
        throw Error(ErrorKind::Validation, "cornea must protrude from the eyeball");
    if (!(in_unit(albedo_pupil) && in_unit(albedo_iris) && in_unit(albedo_sclera) && in_unit(albedo_skin)))
        throw Error(ErrorKind::Validation, "albedos must lie in [0, 1]");
    if (albedo_pupil > 0.05) throw Error(ErrorKind::Validation, "albedo_pupil must be <= 0.05");
    if (!(eyelid_aperture > 0.0)) throw Error(ErrorKind::Validation, "eyelid_aperture must be positive");
    if (handedness != 1 && handedness != -1) throw Error(ErrorKind::Validation, "handedness must be +1 or -1");
}

double PosedEye::iris_plane_depth() const {
    return std::sqrt(eye.eyeball_radius * eye.eyeball_radius - eye.iris_radius * eye.iris_radius);
}

void RigConfig::validate() const {
    if (cameras.empty()) throw Error(ErrorKind::Validation, "rig needs at least one camera");
    if (leds.empty()) throw Error(ErrorKind::Validation, "rig needs at least one LED");
    for (const auto& cam : cameras) {
        cam.intrinsics.validate();
        cam.pose.validate();
    }
    for (const auto& led : leds)
        if (!(led.radiant_intensity >= 0.0)) throw Error(ErrorKind::Validation, "LED radiant_intensity must be >= 0");
}

const RigCamera& RigConfig::camera(int id) const {
    for (const auto& cam : cameras)
        if (cam.id == id) return cam;
    throw Error(ErrorKind::Validation, "rig has no camera with id " + std::to_string(id));
}

RigConfig default_rig() {
    RigConfig rig;
    rig.nominal_eye_center = kNominalEyeCenter;
    RigCamera cam;
    cam.id = 0;
    cam.intrinsics = CameraIntrinsics{270.0, 270.0, 160.0, 120.0, 320, 240};
    cam.pose = look_at(kNominalEyeCenter + Vec3(-6.0, -9.0, 33.0), kNominalEyeCenter);
    rig.cameras.push_back(cam);
    for (int k = 0; k < 6; ++k) {
        const double a = (60.0 * k + 30.0) * kRad;
        Illuminant led;
        led.position = kNominalEyeCenter + Vec3(39.0 * std::cos(a), 30.0 * std::sin(a), 30.0);
        led.radiant_intensity = 340.0;
        rig.leds.push_back(led);
    }
    return rig;
}

std::vector<Vec3> gaze_targets(int count, double half_fov_deg) {
    if (count < 1) throw Error(ErrorKind::Validation, "gaze target count must be >= 1");
    if (!(half_fov_deg > 0.0 && half_fov_deg < 90.0)) throw Error(ErrorKind::Validation, "half_fov must be in (0, 90)");
    std::vector<Vec3> targets{Vec3(0.0, 0.0, 1.0)};
    const int remaining = count - 1;
    if (remaining == 0) return targets;

    // Ring k (1..K) gets a share proportional to k; K is chosen so that the
    // spacing along a ring roughly matches the spacing between rings.
    const double k_real = (-1.0 + std::sqrt(1.0 + 4.0 * remaining / std::numbers::pi)) / 2.0;
    const int rings = std::max(1, static_cast<int>(std::lround(k_real)));
    const double weight_sum = rings * (rings + 1) / 2.0;
    std::vector<int> per_ring(rings);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int k = 1; k <= rings; ++k) {
        const double share = remaining * k / weight_sum;
        per_ring[k - 1] = static_cast<int>(std::floor(share));
        assigned += per_ring[k - 1];
        remainders.emplace_back(share - per_ring[k - 1], k);
    }
    // Largest remainder first; ties go to the outer ring.
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second > b.second;
    });
    for (int i = 0; assigned < remaining; ++i, ++assigned) per_ring[remainders[i].second - 1] += 1;

    for (int k = 1; k <= rings; ++k) {
        const double radius = half_fov_deg * k / rings;
        const int n = per_ring[k - 1];
        for (int j = 0; j < n; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / n;
            targets.push_back(gaze_from_pitch_yaw(radius * std::sin(phi), radius * std::cos(phi)));
        }
    }
    return targets;
}

PosedEye apply_gaze(const EyeModel& eye, const Vec3& gaze) {
    return pose_with_rotation(eye, gaze_rotation(gaze.normalized()));
}

PosedEye apply_gaze(const PosedEye& posed, const Vec3& gaze) {
    return pose_with_rotation(posed.eye, gaze_rotation(gaze.normalized()) * posed.rotation);
}

EyeModel mirror_identity(const EyeModel& eye) {
    EyeModel m = eye;
    m.eyeball_center.x() = -eye.eyeball_center.x();
    m.handedness = -eye.handedness;
    return m;
}

RigCamera mirror_camera(const RigCamera& camera) {
    const Mat3 flip = Eigen::Vector3d(-1.0, 1.0, 1.0).asDiagonal();
    RigCamera m = camera;
    m.pose.rotation = flip * camera.pose.rotation * flip;
    m.pose.translation.x() = -camera.pose.translation.x();
    m.intrinsics.cx = camera.intrinsics.width - camera.intrinsics.cx;
    return m;
}

Illuminant mirror_illuminant(const Illuminant& led) {
    Illuminant m = led;
    m.position.x() = -led.position.x();
    return m;
}

SlippageTransform sample_slippage(std::uint64_t seed, const Vec3& ranges) {
    if (!(ranges.x() > 0.0 && ranges.y() > 0.0 && ranges.z() > 0.0))
        throw Error(ErrorKind::Validation, "slippage ranges must be positive");
    SplitMix64 rng(derive_seed(seed, {0x511bULL}));
    SlippageTransform s;
    s.dx = rng.uniform(-ranges.x(), ranges.x());
    s.dy = rng.uniform(-ranges.y(), ranges.y());
    s.dz = rng.uniform(-ranges.z(), ranges.z());
    return s;
}

EyeModel generate_identity(std::uint64_t identity_seed) {
    SplitMix64 rng(derive_seed(identity_seed, {0x1d3ULL}));
    EyeModel eye;
    eye.eyeball_center = kNominalEyeCenter + Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    eye.eyeball_radius = rng.uniform(11.0, 13.0);
    eye.cornea_radius = rng.uniform(7.5, 8.0);
    eye.cornea_center_offset = eye.eyeball_radius - eye.cornea_radius + rng.uniform(1.2, 1.8);
    eye.iris_radius = rng.uniform(5.6, 6.2);
    eye.pupil_radius = rng.uniform(1.5, 4.0);
    eye.albedo_pupil = rng.uniform(0.005, 0.012);
    eye.albedo_iris = rng.uniform(0.25, 0.6);
    eye.albedo_sclera = rng.uniform(0.6, 0.9);
    eye.albedo_skin = rng.uniform(0.35, 0.75);
    eye.eyelid_aperture = rng.uniform(8.0, 12.0);
    eye.texture_seed = rng.next();
    return eye;
}

}  // namespace ettwin::eyescene
