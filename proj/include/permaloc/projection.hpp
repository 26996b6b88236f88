#pragma once

#include "permaloc/geometry.hpp"
#include "permaloc/io.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace permaloc {

// Spherical front view: 64 elevation rows over [-24.8 deg, +2.0 deg] (row 0
// highest), 448 azimuth columns of 0.18 deg covering [-40.32 deg, +40.32 deg).
struct FrontImage {
    static constexpr int kRows = 64;
    static constexpr int kCols = 448;
    static constexpr double kElevMaxDeg = 2.0;
    static constexpr double kElevMinDeg = -24.8;
    static constexpr double kAzimHalfDeg = 40.32;
    static constexpr double kAzimStepDeg = 0.18;

    std::vector<float> range;         // m, 0 on invalid pixels
    std::vector<float> reflectivity;  // 0 on invalid pixels
    std::vector<uint8_t> validity;

    FrontImage()
        : range(kRows * kCols, 0.f), reflectivity(kRows * kCols, 0.f), validity(kRows * kCols, 0) {}

    static int index(int row, int col) { return row * kCols + col; }
};

// Bird's-eye view: 0.1 m cells over x in [0, 60) m (rows) and y in [-25, 25) m
// (columns), six statistics per cell.
struct BevImage {
    static constexpr int kRows = 600;
    static constexpr int kCols = 500;
    static constexpr double kCell = 0.1;
    static constexpr double kXMax = 60.0;
    static constexpr double kYHalf = 25.0;

    std::vector<float> binary;
    std::vector<float> count;
    std::vector<float> mean_reflectivity;
    std::vector<float> mean_height;
    std::vector<float> min_height;
    std::vector<float> max_height;

    BevImage()
        : binary(kRows * kCols, 0.f),
          count(kRows * kCols, 0.f),
          mean_reflectivity(kRows * kCols, 0.f),
          mean_height(kRows * kCols, 0.f),
          min_height(kRows * kCols, 0.f),
          max_height(kRows * kCols, 0.f) {}

    static int index(int row, int col) { return row * kCols + col; }
};

// Pixel -> source point indices in compressed-row form, plus the reverse map.
struct IndexMap {
    int rows = 0;
    int cols = 0;
    std::vector<int> offsets;         // rows*cols + 1 entries
    std::vector<int> indices;         // grouped by pixel
    std::vector<int> pixel_of_point;  // flat pixel index per source point, -1 if dropped

    std::pair<const int*, const int*> at(int row, int col) const {
        const int p = row * cols + col;
        return {indices.data() + offsets[p], indices.data() + offsets[p + 1]};
    }
};

struct BBox3D {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Zero();  // full extents, m
    double yaw = 0.0;
    std::string label = "Car";
    int frame = 0;

    // Inclusive containment test in the box's yaw-rotated frame.
    bool contains(const Eigen::Vector3d& p) const;
};

// Bin predicates shared by projection, the oracle segmenter, and fusion.
// nullopt when the point falls outside the view's crop.
std::optional<std::pair<int, int>> front_pixel_of(const Point& p);
std::optional<std::pair<int, int>> bev_cell_of(const Point& p);

std::pair<FrontImage, IndexMap> project_front(const PointCloud& cloud);
std::pair<BevImage, IndexMap> project_bev(const PointCloud& cloud);

// Order-preserving crop to the region at least one view can see. The mapping
// and localization pipeline runs on cropped scans, so every point it touches
// was a candidate for movable-object filtering.
PointCloud crop_to_coverage(const PointCloud& cloud);

struct GtMasks {
    Raster front;                       // 64x448, 1 = movable
    Raster bev;                         // 600x500, 1 = movable
    std::vector<uint8_t> point_labels;  // 1 = inside at least one box
};

GtMasks gen_gt_masks(const PointCloud& cloud, const std::vector<BBox3D>& boxes);

// Box file: one line per box with fields frame, class, center[3], size[3], yaw.
std::vector<BBox3D> read_boxes(const std::string& path);
void write_boxes(const std::string& path, const std::vector<BBox3D>& boxes);

} // namespace permaloc
