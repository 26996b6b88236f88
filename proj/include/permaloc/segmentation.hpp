#pragma once

#include "permaloc/network.hpp"
#include "permaloc/projection.hpp"

#include <functional>
#include <vector>

namespace permaloc {

// Per-point movable probabilities, one per view; -1 marks a point outside
// that view's crop (no prediction exists there).
struct SegmentationResult {
    std::vector<float> p_front;
    std::vector<float> p_bev;

    static constexpr float kAbsent = -1.f;
};

// Pluggable per-frame segmentation backend. The box list is ground truth for
// the oracle backend; learned backends ignore it.
using Segmenter =
    std::function<SegmentationResult(const PointCloud&, const std::vector<BBox3D>&)>;

// Ground-truth stand-in: p = 0.95 inside a box, 0.05 outside, per view, then
// each per-view value flips (p -> 1-p) independently with probability
// flip_prob. Flip draws are keyed on (seed, frame_id, view, point index) so a
// frame's labels do not depend on evaluation order.
SegmentationResult oracle_segment(const PointCloud& cloud, const std::vector<BBox3D>& boxes,
                                  double flip_prob, uint64_t seed);

// Probability rasters indexed by the standard projections; front must be
// 64x448 and bev 600x500.
SegmentationResult segment_from_rasters(const PointCloud& cloud, const Raster& front_probs,
                                        const Raster& bev_probs);

// Runs both networks on the projected images and reads each point's
// probability from the finest prediction map.
SegmentationResult segment_with_networks(const PointCloud& cloud, const FrontNetParams& front,
                                         const BevNetParams& bev);

Segmenter make_oracle_segmenter(double flip_prob, uint64_t seed);
Segmenter make_raster_segmenter(Raster front_probs, Raster bev_probs);

} // namespace permaloc
