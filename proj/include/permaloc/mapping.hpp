#pragma once

#include "permaloc/icp.hpp"
#include "permaloc/segmentation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace permaloc {

// One recorded scan plus the ground-truth movable boxes that an oracle
// segmenter needs; learned backends ignore the boxes.
struct SessionFrame {
    PointCloud cloud;
    std::vector<BBox3D> movable_boxes;
};

inline constexpr uint8_t kEdgePoint = 0;
inline constexpr uint8_t kPlanarPoint = 1;

// Feature map in the world frame. Each point carries its feature type and the
// index of the frame it came from; poses[source[i]] is the transform that
// placed it. Immutable once built; the index always covers exactly `points`.
struct MapStore {
    PointCloud points;
    std::vector<uint8_t> type;
    std::vector<uint32_t> source;
    std::vector<Pose> poses;
    bool filtered = false;
    KdTree index;

    std::size_t size() const { return points.points.size(); }
};

// Per frame: crop to view coverage, optionally segment and remove movables,
// then extract edge/planar features and place them with the frame's pose.
// The final map is voxel-deduplicated at 0.2 m, keeping the first point per
// voxel in append order (frames in order, edges before planars within one).
// Preprocessing runs on `threads` workers (0 = hardware concurrency); the
// segmenter is only invoked when filter is true.
MapStore build_gt_map(const std::vector<SessionFrame>& frames, const std::vector<Pose>& poses,
                      bool filter, const Segmenter& segmenter, int threads = 0);

// All map points within horizontal (xy) distance `radius` of center, with a
// fresh index. An empty selection returns nullopt: the caller cannot
// re-localize there.
std::optional<IndexedCloud> extract_submap(const MapStore& map, const Eigen::Vector3d& center,
                                           double radius = 60.0);

// Binary map file: magic "DMAP", u32 version 1, u8 filtered flag, u32 point
// count, per point 3xfloat32 position + u8 type + u32 source frame, then u32
// pose count and 12 float32 per pose ([R|t] rows). Little-endian throughout.
// Positions and poses are stored at float32, so reflectivity is dropped and a
// loaded map re-saves byte-identically.
void save_map(const MapStore& map, const std::string& path);
MapStore load_map(const std::string& path);

} // namespace permaloc
