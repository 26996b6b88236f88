#include "permaloc/loam_features.hpp"

#include "permaloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace permaloc {

namespace {

struct Plane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0; // normal . p + offset = 0

    double distance(const Point& p) const {
        return std::abs(normal.x() * p.x + normal.y() * p.y + normal.z() * p.z + offset);
    }
};

} // namespace

GroundRemoval remove_ground(const PointCloud& cloud, const FeatureParams& params) {
    if (cloud.size() < 50) throw std::invalid_argument("remove_ground needs at least 50 points");

    const int n = static_cast<int>(cloud.size());
    const double cos_gate = std::cos(params.ground_normal_max_deg * M_PI / 180.0);
    Rng rng(mix64(0x9707d0u, static_cast<uint64_t>(static_cast<int64_t>(cloud.frame_id))));

    Plane best;
    int best_count = -1;
    for (int iter = 0; iter < params.ground_iterations; ++iter) {
        const int ia = rng.uniform_int(n);
        int ib = rng.uniform_int(n);
        while (ib == ia) ib = rng.uniform_int(n);
        int ic = rng.uniform_int(n);
        while (ic == ia || ic == ib) ic = rng.uniform_int(n);

        const Eigen::Vector3d a = cloud.points[ia].position();
        Eigen::Vector3d normal =
            (cloud.points[ib].position() - a).cross(cloud.points[ic].position() - a);
        const double len = normal.norm();
        if (len < 1e-9) continue;
        normal /= len;
        if (normal.z() < 0) normal = -normal;
        if (normal.z() < cos_gate) continue;

        const Plane plane{normal, -normal.dot(a)};
        int count = 0;
        for (const Point& p : cloud.points) {
            if (plane.distance(p) <= params.ground_inlier_dist) ++count;
        }
        if (count > best_count) {
            best_count = count;
            best = plane;
        }
    }

    GroundRemoval out;
    out.ground.assign(cloud.size(), 0);
    out.nonground.frame_id = cloud.frame_id;
    if (best_count < params.ground_min_inlier_frac * n) {
        out.nonground = cloud;
        return out;
    }
    for (int i = 0; i < n; ++i) {
        if (best.distance(cloud.points[i]) <= params.ground_inlier_dist) {
            out.ground[i] = 1;
        } else {
            out.nonground.points.push_back(cloud.points[i]);
        }
    }
    return out;
}

std::vector<double> compute_smoothness(const FrontImage& image, int window) {
    if (window < 1) throw std::invalid_argument("smoothness window must be positive");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> c(FrontImage::kRows * FrontImage::kCols, inf);
    const double denom_scale = 4.0 * window * window;
    for (int row = 0; row < FrontImage::kRows; ++row) {
        for (int col = window; col < FrontImage::kCols - window; ++col) {
            const int center = FrontImage::index(row, col);
            if (!image.validity[center]) continue;
            double sum = 0.0;
            bool complete = true;
            for (int d = -window; d <= window && complete; ++d) {
                if (d == 0) continue;
                const int idx = FrontImage::index(row, col + d);
                if (!image.validity[idx]) {
                    complete = false;
                } else {
                    sum += double(image.range[idx]) - double(image.range[center]);
                }
            }
            if (!complete) continue;
            const double rho = image.range[center];
            c[center] = sum * sum / (denom_scale * rho * rho);
        }
    }
    return c;
}

FeatureSet extract_features(const PointCloud& cloud, const FrontImage& image, const IndexMap& map,
                            const std::vector<double>& smoothness, const FeatureParams& params) {
    if (map.rows != FrontImage::kRows || map.cols != FrontImage::kCols)
        throw std::invalid_argument("extract_features expects a front-view index map");
    if (smoothness.size() != static_cast<size_t>(FrontImage::kRows * FrontImage::kCols))
        throw std::invalid_argument("smoothness size does not match the front view");
    if (params.sectors < 1) throw std::invalid_argument("sector count must be positive");

    // The point behind each valid pixel: the nearest of the pixel's points,
    // earliest index on ties, matching the projection's collision rule.
    std::vector<int> winner(FrontImage::kRows * FrontImage::kCols, -1);
    for (int row = 0; row < FrontImage::kRows; ++row) {
        for (int col = 0; col < FrontImage::kCols; ++col) {
            const auto [begin, end] = map.at(row, col);
            int best = -1;
            double best_rho = 0.0;
            for (const int* it = begin; it != end; ++it) {
                const double rho = cloud.points[*it].range();
                if (best < 0 || rho < best_rho) {
                    best = *it;
                    best_rho = rho;
                }
            }
            winner[FrontImage::index(row, col)] = best;
        }
    }

    FeatureSet out;
    out.frame_id = cloud.frame_id;
    out.edge.frame_id = cloud.frame_id;
    out.planar.frame_id = cloud.frame_id;

    std::vector<uint8_t> suppressed(FrontImage::kCols);
    std::vector<int> order;
    for (int row = 0; row < FrontImage::kRows; ++row) {
        std::fill(suppressed.begin(), suppressed.end(), 0);
        auto suppress = [&](int col) {
            const int lo = std::max(0, col - params.suppression_cols);
            const int hi = std::min(FrontImage::kCols - 1, col + params.suppression_cols);
            for (int c = lo; c <= hi; ++c) suppressed[c] = 1;
        };
        for (int s = 0; s < params.sectors; ++s) {
            const int lo = s * FrontImage::kCols / params.sectors;
            const int hi = (s + 1) * FrontImage::kCols / params.sectors;
            order.clear();
            for (int col = lo; col < hi; ++col) {
                if (std::isfinite(smoothness[FrontImage::index(row, col)])) order.push_back(col);
            }
            const auto c_of = [&](int col) { return smoothness[FrontImage::index(row, col)]; };

            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double ca = c_of(a), cb = c_of(b);
                return ca != cb ? ca > cb : a < b;
            });
            int picked = 0;
            for (int col : order) {
                if (picked >= params.edges_per_sector || c_of(col) <= params.c_edge) break;
                if (suppressed[col]) continue;
                out.edge.points.push_back(cloud.points[winner[FrontImage::index(row, col)]]);
                suppress(col);
                ++picked;
            }

            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double ca = c_of(a), cb = c_of(b);
                return ca != cb ? ca < cb : a < b;
            });
            picked = 0;
            for (int col : order) {
                if (picked >= params.planars_per_sector || c_of(col) >= params.c_plane) break;
                if (suppressed[col]) continue;
                out.planar.points.push_back(cloud.points[winner[FrontImage::index(row, col)]]);
                suppress(col);
                ++picked;
            }
        }
    }
    return out;
}

FeatureSet extract_frame_features(const PointCloud& cloud, const FeatureParams& params) {
    const GroundRemoval ground = remove_ground(cloud, params);
    const auto [image, map] = project_front(ground.nonground);
    const std::vector<double> c = compute_smoothness(image, params.smoothness_window);
    return extract_features(ground.nonground, image, map, c, params);
}

} // namespace permaloc
