#include "ettwin/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>


#include "ettwin/core/error.hpp"

namespace ettwin {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::Validation, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorKind::Validation, "camera resolution must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw Error(ErrorKind::Validation, "principal point must lie inside the sensor");
}

void CameraPose::validate() const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw Error(ErrorKind::Validation, "camera rotation is not a proper orthonormal matrix");
    if (!translation.allFinite()) throw Error(ErrorKind::Validation, "camera translation is not finite");
}

CameraPose look_at(const Vec3& position, const Vec3& target) {
    const Vec3 forward = (target - position).normalized();
    Vec3 up = Vec3::UnitY();
    if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = Vec3::UnitZ();
    // Camera y points down in the image, i.e. against device up.
    const Vec3 down = -(up - up.dot(forward) * forward).normalized();
    const Vec3 right = down.cross(forward);
    CameraPose pose;
    pose.rotation.row(0) = right;
    pose.rotation.row(1) = down;
    pose.rotation.row(2) = forward;
    pose.translation = position;
    return pose;
}

Vec2 project(const Vec3& point, const CameraIntrinsics& intrinsics, const CameraPose& pose) {
    const Vec3 c = pose.to_camera(point);
    if (!(c.z() > 1e-9)) throw Error(ErrorKind::BehindCamera, "point is behind camera");
    return {intrinsics.fx * c.x() / c.z() + intrinsics.cx, intrinsics.fy * c.y() / c.z() + intrinsics.cy};
}

Vec3 gaze_from_pitch_yaw(double pitch_deg, double yaw_deg) {
    const double p = pitch_deg * kDeg;
    const double y = yaw_deg * kDeg;
    return {std::cos(p) * std::sin(y), std::sin(p), std::cos(p) * std::cos(y)};
}

Vec2 pitch_yaw_from_gaze(const Vec3& gaze) {
    return {std::asin(std::clamp(gaze.y(), -1.0, 1.0)) / kDeg, std::atan2(gaze.x(), gaze.z()) / kDeg};
}

}  // namespace ettwin

#include "ettwin/core/gaze.hpp"

namespace ettwin {

void GazeSample::validate(double half_fov_deg, int target_count) const {
    if (std::abs(gaze.norm() - 1.0) > 1e-9) throw Error(ErrorKind::Validation, "gaze must be unit norm");
    const Vec2 py = pitch_yaw_from_gaze(gaze);
    if (std::abs(py.x()) > half_fov_deg + 1e-9 || std::abs(py.y()) > half_fov_deg + 1e-9)
        throw Error(ErrorKind::Validation, "gaze pitch/yaw outside the target field of view");
    if (target_index < 0 || target_index >= target_count) throw Error(ErrorKind::Validation, "target_index out of range");
}

}  // namespace ettwin
