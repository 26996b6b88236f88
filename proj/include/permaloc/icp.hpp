#pragma once

#include "permaloc/loam_features.hpp"

namespace permaloc {

// A point cloud bundled with its spatial index.
struct IndexedCloud {
    PointCloud cloud;
    KdTree tree;

    IndexedCloud() = default;
    explicit IndexedCloud(PointCloud c) : cloud(std::move(c)), tree(cloud) {}
};

struct IcpParams {
    int max_iterations = 30;
    double translation_eps = 1e-3;  // m, per-step delta below which we stop
    double rotation_eps_deg = 0.01; // degrees, same role
    double rejection_dist = 1.0;    // m, correspondences beyond are dropped; <= 0 disables
};

struct IcpResult {
    Pose transform; // maps source-frame points into the target frame
    // Mean squared nearest-neighbour distance over all source points at the
    // returned transform, m^2. Unlike the gated means in score_history this
    // charges for source points with no nearby target, so a pose matching only
    // part of the frame scores high.
    double fitting_score = 0.0;
    int iterations = 0;
    bool converged = false;
    // Fixed-correspondence score after each estimation step; non-increasing
    // because a step that would raise it is reverted and the loop exits.
    std::vector<double> score_history;
};

// Iterated nearest-neighbour correspondence with closed-form rigid estimation
// over all source features against the pooled target cloud. Fewer than three
// non-collinear accepted correspondences is a degenerate failure.
IcpResult icp_register(const FeatureSet& source, const IndexedCloud& target, const Pose& init,
                       const IcpParams& params = {});

// Edge and planar points of a feature set pooled into one cloud.
PointCloud pooled_features(const FeatureSet& features);

} // namespace permaloc
