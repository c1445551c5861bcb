#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ettwin {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Pixel (i, j) covers [i, i+1) x [j, j+1); its center is (i+0.5, j+0.5).
struct CameraIntrinsics {
    double fx = 270.0;
    double fy = 270.0;
    double cx = 160.0;
    double cy = 120.0;
    int width = 320;
    int height = 240;

    void validate() const;
    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Rigid camera pose. `rotation` maps device-frame directions into the camera
/// frame (x right, y down, z along the optical axis); `translation` is the
/// camera center in device coordinates (mm).
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const;
    Vec3 to_camera(const Vec3& device_point) const { return rotation * (device_point - translation); }
    friend bool operator==(const CameraPose& a, const CameraPose& b) {
        return a.rotation == b.rotation && a.translation == b.translation;
    }
};

/// Pose at `position` whose optical axis points at `target`; image up follows
/// device +y unless the view is vertical, in which case device +z is used.
CameraPose look_at(const Vec3& position, const Vec3& target);

/// Pinhole projection of a device-frame point. Throws BehindCamera for camera z <= 1e-9 mm.
Vec2 project(const Vec3& point, const CameraIntrinsics& intrinsics, const CameraPose& pose);

/// Unit gaze vector from pitch (up positive) and yaw (toward +x positive), degrees.
Vec3 gaze_from_pitch_yaw(double pitch_deg, double yaw_deg);
/// Inverse of gaze_from_pitch_yaw; returns {pitch, yaw} in degrees.
Vec2 pitch_yaw_from_gaze(const Vec3& gaze);

}  // namespace ettwin
