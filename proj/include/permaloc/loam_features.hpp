#pragma once

#include "permaloc/projection.hpp"

namespace permaloc {

// Edge and planar feature points selected from one scan. Both clouds hold
// verbatim copies of source points; the two sets are disjoint.
struct FeatureSet {
    PointCloud edge;
    PointCloud planar;
    int frame_id = 0;

    std::size_t size() const { return edge.size() + planar.size(); }
};

struct FeatureParams {
    // Ground plane consensus fit.
    double ground_inlier_dist = 0.2;     // m, point-to-plane
    double ground_normal_max_deg = 15.0; // tilt gate against +z
    int ground_iterations = 100;
    double ground_min_inlier_frac = 0.2;

    // Row smoothness and selection.
    int smoothness_window = 5; // columns each side
    double c_edge = 0.5;       // select edges with c strictly above
    double c_plane = 0.05;     // select planars with c strictly below
    int sectors = 6;
    int edges_per_sector = 2;
    int planars_per_sector = 4;
    int suppression_cols = 5; // columns each side of a pick
};

struct GroundRemoval {
    PointCloud nonground;
    // One entry per input point, 1 = on the dominant plane. All zero when no
    // acceptable plane was found; nonground is then the whole input.
    std::vector<uint8_t> ground;
};

// Consensus plane fit seeded from the cloud's frame_id: samples of three
// points propose planes, a plane counts only when its normal is within
// ground_normal_max_deg of vertical, and the largest inlier set wins. Below
// ground_min_inlier_frac coverage the cloud is returned unchanged.
GroundRemoval remove_ground(const PointCloud& cloud, const FeatureParams& params = {});

// Per-pixel curvature of the front-view range image:
//   c = (sum over the +-window row neighbours of (rho_j - rho_i))^2
//       / ((2 window)^2 * rho_i^2)
// Pixels that are invalid, or whose window leaves the image or crosses an
// invalid pixel, get +infinity and are never selected.
std::vector<double> compute_smoothness(const FrontImage& image, int window = 5);

// Splits each row into equal-width azimuth sectors and picks per sector up to
// edges_per_sector points of largest c above c_edge, then up to
// planars_per_sector of smallest c below c_plane. Every pick suppresses
// candidates within suppression_cols columns in its row; ties break toward
// the lower column.
FeatureSet extract_features(const PointCloud& cloud, const FrontImage& image, const IndexMap& map,
                            const std::vector<double>& smoothness,
                            const FeatureParams& params = {});

// remove_ground, front projection, smoothness, and selection in one step.
FeatureSet extract_frame_features(const PointCloud& cloud, const FeatureParams& params = {});

} // namespace permaloc
