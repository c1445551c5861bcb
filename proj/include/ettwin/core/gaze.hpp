#pragma once

#include "ettwin/core/geometry.hpp"

namespace ettwin {

inline constexpr int kGazeTargetCount = 114;
inline constexpr double kGazeHalfFovDeg = 35.0;

/// Ground-truth label of one frame.
struct GazeSample {
    Vec3 gaze = Vec3::UnitZ();  // unit visual axis, device frame
    int target_index = 0;       // [0, 114) with the default target set
    int identity_id = 0;

    /// Unit norm within 1e-9 and pitch/yaw within +-half_fov.
    void validate(double half_fov_deg = kGazeHalfFovDeg, int target_count = kGazeTargetCount) const;
};

}  // namespace ettwin
