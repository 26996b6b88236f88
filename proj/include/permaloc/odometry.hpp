#pragma once

#include "permaloc/icp.hpp"

namespace permaloc {

// Projection of a pose onto planar motion: yaw-only rotation, height pinned
// to z. Ground removal strips the only surfaces that observe height, roll,
// and pitch on flat scenes, so pose updates constrain those axes explicitly.
Pose planar_project(const Pose& pose, double z);

// One frame-to-frame step: registers the current features against the
// previous frame's pooled features, starting from the constant-velocity
// motion prior, then projects onto planar motion at the previous height.
// On registration failure the prior is applied unchanged (dead reckoning).
Pose odometry_step(const FeatureSet& prev, const FeatureSet& curr, const Pose& prev_pose,
                   const Pose& motion_prior, const IcpParams& params = {});

} // namespace permaloc
