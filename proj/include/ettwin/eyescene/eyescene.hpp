#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ettwin/core/geometry.hpp"
#include "ettwin/core/image.hpp"

namespace ettwin::eyescene {

/// Nominal right-eye center in device coordinates (mm). Device frame: +z out
/// of the face, +y up, right handed, so the wearer's right is -x.
inline const Vec3 kNominalEyeCenter{-32.0, 0.0, 0.0};

/// Parametric eye and periocular region of one identity.
struct EyeModel {
    Vec3 eyeball_center = kNominalEyeCenter;
    double eyeball_radius = 12.0;
    double cornea_radius = 7.8;
    double cornea_center_offset = 5.6;  // along the visual axis from eyeball_center
    double pupil_radius = 2.5;
    double iris_radius = 6.0;
    double albedo_pupil = 0.015;
    double albedo_iris = 0.4;
    double albedo_sclera = 0.75;
    double albedo_skin = 0.55;
    double eyelid_aperture = 10.0;  // vertical half-opening, mm
    std::uint64_t texture_seed = 0;
    /// +1 for the modeled (right) eye, -1 after mirroring. Texture lookups use
    /// handedness * local x so a mirrored identity carries a mirrored texture.
    int handedness = 1;

    /// Throws Validation when an anatomical or albedo invariant is broken.
    void validate() const;
    friend bool operator==(const EyeModel& a, const EyeModel& b) = default;
};

struct Illuminant {
    Vec3 position = Vec3::Zero();
    double radiant_intensity = 0.0;
    double wavelength_nm = 850.0;

    friend bool operator==(const Illuminant&, const Illuminant&) = default;
};

struct RigCamera {
    int id = 0;
    CameraIntrinsics intrinsics;
    CameraPose pose;

    friend bool operator==(const RigCamera&, const RigCamera&) = default;
};

struct RigConfig {
    std::vector<RigCamera> cameras;
    std::vector<Illuminant> leds;
    Vec3 nominal_eye_center = kNominalEyeCenter;

    void validate() const;
    const RigCamera& camera(int id) const;
    friend bool operator==(const RigConfig&, const RigConfig&) = default;
};

/// Glasses-frame style rig: one 320x240 camera (f = 270 px) low and temporal
/// to the right eye, aimed at the eye center, and a ring of six 850 nm LEDs.
RigConfig default_rig();

/// Rigid translation of the device (camera + LEDs) relative to the eye, mm.
struct SlippageTransform {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;

    Vec3 offset() const { return {dx, dy, dz}; }
    friend bool operator==(const SlippageTransform&, const SlippageTransform&) = default;
};

/// Eye rotated to a gaze direction. The eyeball center never moves; the upper
/// lid follows downward pitch.
struct PosedEye {
    EyeModel eye;
    Mat3 rotation = Mat3::Identity();  // rest frame -> device frame
    double upper_aperture = 10.0;      // mm above the eyeball center

    Vec3 visual_axis() const { return rotation.col(2); }
    Vec3 cornea_center() const { return eye.eyeball_center + eye.cornea_center_offset * visual_axis(); }
    Vec3 cornea_apex() const {
        return eye.eyeball_center + (eye.cornea_center_offset + eye.cornea_radius) * visual_axis();
    }
    /// Depth of the iris plane along the visual axis, from the eyeball center.
    double iris_plane_depth() const;
    Vec3 pupil_center() const { return eye.eyeball_center + iris_plane_depth() * visual_axis(); }
};

/// Upper lid drop per degree of downward pitch, mm.
inline constexpr double kLidDropPerDegree = 0.3;

/// Deterministic gaze targets: target 0 straight ahead, the rest on concentric
/// rings in (pitch, yaw) space with radii equally spaced up to half_fov and
/// per-ring counts proportional to the ring radius.
std::vector<Vec3> gaze_targets(int count = 114, double half_fov_deg = 35.0);

PosedEye apply_gaze(const EyeModel& eye, const Vec3& gaze);
/// Rotates an already posed eye further, composing with its current rotation.
PosedEye apply_gaze(const PosedEye& posed, const Vec3& gaze);

struct RenderOptions {
    bool specular = true;  // Blinn lobe on the cornea
    bool glints = true;    // splatted analytic glints
};

/// One primary ray per pixel center. Output is linear and unclamped.
/// Throws DegenerateCamera when the camera sits inside the eye or behind the skin.
LinearImage render(const PosedEye& eye, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   std::span<const Illuminant> leds, const SlippageTransform& slippage = {},
                   const RenderOptions& options = {});

/// Corneal reflection point of `led` seen from the camera, in device
/// coordinates, or nullopt when occluded or facing away.
std::optional<Vec3> glint_point(const PosedEye& eye, const CameraPose& pose, const Illuminant& led,
                                const SlippageTransform& slippage = {});

/// Pixel position of the glint of `led`; empty when there is no visible glint.
std::vector<Vec2> glint_positions(const PosedEye& eye, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                  const Illuminant& led, const SlippageTransform& slippage = {});

/// Reflection across the device x = 0 plane.
EyeModel mirror_identity(const EyeModel& eye);
/// Mirrored camera: pose reflected across x = 0 with the image x axis flipped
/// so the rotation stays proper; the principal point moves to width - cx.
RigCamera mirror_camera(const RigCamera& camera);
Illuminant mirror_illuminant(const Illuminant& led);

inline const Vec3 kDefaultSlippageRange{3.0, 3.0, 6.0};

/// Independent uniform draws in [-range, range) per axis, deterministic in seed.
SlippageTransform sample_slippage(std::uint64_t seed, const Vec3& ranges = kDefaultSlippageRange);

/// Jittered anatomy and appearance for one synthetic identity.
EyeModel generate_identity(std::uint64_t identity_seed);

}  // namespace ettwin::eyescene
