#include "permaloc/odometry.hpp"

namespace permaloc {

Pose planar_project(const Pose& pose, double z) {
    return Pose::from_yaw(pose.yaw(), {pose.translation.x(), pose.translation.y(), z});
}

Pose odometry_step(const FeatureSet& prev, const FeatureSet& curr, const Pose& prev_pose,
                   const Pose& motion_prior, const IcpParams& params) {
    const double height = prev_pose.translation.z();
    if (curr.size() == 0 || prev.size() < 10)
        return planar_project(pose_compose(prev_pose, motion_prior), height);
    const IndexedCloud target(pooled_features(prev));
    const IcpResult icp = icp_register(curr, target, motion_prior, params);
    // A degenerate exit (no usable correspondence geometry) leaves the loop
    // before the iteration budget; the estimate is untrustworthy then.
    const bool failed = !icp.converged && icp.iterations < params.max_iterations;
    const Pose raw = pose_compose(prev_pose, failed ? motion_prior : icp.transform);
    return planar_project(raw, height);
}

} // namespace permaloc
