#pragma once

#include "permaloc/projection.hpp"
#include "permaloc/segmentation.hpp"

#include <vector>

namespace permaloc {

struct Cluster {
    std::vector<int> indices;  // ascending, distinct
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    double mean_p_front = 0.0;  // over members with front coverage
    double mean_p_bev = 0.0;    // over members with bev coverage
    int front_count = 0;
    int bev_count = 0;
};

struct FilterParams {
    double candidate_threshold = 0.5;  // max over present views
    double link_dist = 0.5;            // m, single-linkage radius
    int min_cluster_size = 50;
    double score_threshold = 0.13;  // on 0.2*mean_bev + 0.1*mean_front
    double removal_radius = 0.10;   // m, inclusive
};

// Maps per-pixel probability rasters back to the points that produced them,
// using the projections' reverse maps; absent where a point was dropped.
SegmentationResult fuse_to_3d(const Raster& front_probs, const Raster& bev_probs,
                              const IndexMap& front_map, const IndexMap& bev_map,
                              const PointCloud& cloud);

// Euclidean single-linkage components over the candidate points: two
// candidates join iff their distance <= link_dist. Output ordered by each
// cluster's smallest member index.
std::vector<Cluster> cluster_points(const PointCloud& cloud, const std::vector<int>& candidates,
                                    double link_dist = 0.5);

// Fills per-view probability means from the segmentation result.
void annotate_clusters(std::vector<Cluster>& clusters, const SegmentationResult& seg);

// Keeps clusters with at least min_size members and weighted score
// 0.2*mean_p_bev + 0.1*mean_p_front >= threshold; a view covering no member
// contributes zero.
std::vector<Cluster> validate_clusters(const std::vector<Cluster>& clusters, int min_size = 50,
                                       double score_threshold = 0.13);

// Drops every point within radius (inclusive) of any seed point, the seeds
// themselves included; survivor order preserved.
PointCloud radius_filter(const PointCloud& cloud, const std::vector<int>& seed_indices,
                         double radius = 0.10);

struct FilterResult {
    PointCloud filtered;
    std::vector<uint8_t> removed;  // per input point, 1 = movable-removed
    std::vector<Cluster> accepted;
};

// Candidate selection, clustering, validation, and radius removal in one
// pass over a segmented frame.
FilterResult filter_movable(const PointCloud& cloud, const SegmentationResult& seg,
                            const FilterParams& params = {});

} // namespace permaloc
