#include "permaloc/segmentation.hpp"

#include "permaloc/rng.hpp"

#include <stdexcept>

namespace permaloc {

namespace {

double flip_draw(uint64_t seed, int frame_id, int view, size_t index) {
    const uint64_t key =
        mix64(mix64(mix64(seed, static_cast<uint64_t>(frame_id)), static_cast<uint64_t>(view)),
              static_cast<uint64_t>(index));
    return u64_to_unit(splitmix64(key));
}

} // namespace

SegmentationResult oracle_segment(const PointCloud& cloud, const std::vector<BBox3D>& boxes,
                                  double flip_prob, uint64_t seed) {
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw std::invalid_argument("flip probability must be in [0, 1]");
    SegmentationResult out;
    out.p_front.assign(cloud.size(), SegmentationResult::kAbsent);
    out.p_bev.assign(cloud.size(), SegmentationResult::kAbsent);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Point& pt = cloud.points[i];
        bool inside = false;
        const Eigen::Vector3d pos = pt.position().cast<double>();
        for (const BBox3D& box : boxes) {
            if (box.contains(pos)) {
                inside = true;
                break;
            }
        }
        const float base = inside ? 0.95f : 0.05f;
        // Both draws happen for every point regardless of coverage, so the
        // flip stream is independent of which views see the point.
        const double u_front = flip_draw(seed, cloud.frame_id, 0, i);
        const double u_bev = flip_draw(seed, cloud.frame_id, 1, i);
        if (front_pixel_of(pt)) out.p_front[i] = u_front < flip_prob ? 1.f - base : base;
        if (bev_cell_of(pt)) out.p_bev[i] = u_bev < flip_prob ? 1.f - base : base;
    }
    return out;
}

SegmentationResult segment_from_rasters(const PointCloud& cloud, const Raster& front_probs,
                                        const Raster& bev_probs) {
    if (front_probs.h != FrontImage::kRows || front_probs.w != FrontImage::kCols)
        throw std::invalid_argument("front probability raster must be 64x448");
    if (bev_probs.h != BevImage::kRows || bev_probs.w != BevImage::kCols)
        throw std::invalid_argument("bev probability raster must be 600x500");
    SegmentationResult out;
    out.p_front.assign(cloud.size(), SegmentationResult::kAbsent);
    out.p_bev.assign(cloud.size(), SegmentationResult::kAbsent);
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (const auto px = front_pixel_of(cloud.points[i]))
            out.p_front[i] = front_probs.at(px->first, px->second);
        if (const auto cell = bev_cell_of(cloud.points[i]))
            out.p_bev[i] = bev_probs.at(cell->first, cell->second);
    }
    return out;
}

SegmentationResult segment_with_networks(const PointCloud& cloud, const FrontNetParams& front,
                                         const BevNetParams& bev) {
    const auto [front_img, front_map] = project_front(cloud);
    const auto [bev_img, bev_map] = project_bev(cloud);
    const auto front_maps = front_forward(tensor_from_front(front_img), front);
    const auto bev_maps = bev_forward(tensor_from_bev(bev_img), bev);
    const Tensor& front_fine = front_maps.back();
    const Tensor& bev_fine = bev_maps.back();

    SegmentationResult out;
    out.p_front.assign(cloud.size(), SegmentationResult::kAbsent);
    out.p_bev.assign(cloud.size(), SegmentationResult::kAbsent);
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (const auto px = front_pixel_of(cloud.points[i]))
            out.p_front[i] = static_cast<float>(front_fine.at3(px->first, px->second, 1));
        if (const auto cell = bev_cell_of(cloud.points[i]))
            out.p_bev[i] = static_cast<float>(bev_fine.at3(cell->first, cell->second, 1));
    }
    return out;
}

Segmenter make_oracle_segmenter(double flip_prob, uint64_t seed) {
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw std::invalid_argument("flip probability must be in [0, 1]");
    return [flip_prob, seed](const PointCloud& cloud, const std::vector<BBox3D>& boxes) {
        return oracle_segment(cloud, boxes, flip_prob, seed);
    };
}

Segmenter make_raster_segmenter(Raster front_probs, Raster bev_probs) {
    return [front = std::move(front_probs), bev = std::move(bev_probs)](
               const PointCloud& cloud, const std::vector<BBox3D>&) {
        return segment_from_rasters(cloud, front, bev);
    };
}

} // namespace permaloc
