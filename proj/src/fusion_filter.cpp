#include "permaloc/fusion_filter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace permaloc {

namespace {

// Spatial hash over cubic cells; neighbors of a point within one cell size
// are confined to the 27 surrounding cells.
struct CellGrid {
    double cell;
    std::unordered_map<uint64_t, std::vector<int>> cells;

    explicit CellGrid(double cell_size) : cell(cell_size) {}

    static uint64_t key(int ix, int iy, int iz) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(ix)) * 73856093u) ^
               (static_cast<uint64_t>(static_cast<uint32_t>(iy)) * 19349663u) ^
               (static_cast<uint64_t>(static_cast<uint32_t>(iz)) * 83492791u) ^
               (static_cast<uint64_t>(static_cast<uint32_t>(ix ^ iy ^ iz)) << 32);
    }

    int coord(double v) const { return static_cast<int>(std::floor(v / cell)); }

    void insert(const Eigen::Vector3d& p, int id) {
        cells[key(coord(p.x()), coord(p.y()), coord(p.z()))].push_back(id);
    }

    template <typename Fn>
    void visit_neighbors(const Eigen::Vector3d& p, Fn&& fn) const {
        const int ix = coord(p.x()), iy = coord(p.y()), iz = coord(p.z());
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = -1; dz <= 1; ++dz) {
                    const auto it = cells.find(key(ix + dx, iy + dy, iz + dz));
                    if (it == cells.end()) continue;
                    for (int id : it->second) fn(id);
                }
            }
        }
    }
};

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

SegmentationResult fuse_to_3d(const Raster& front_probs, const Raster& bev_probs,
                              const IndexMap& front_map, const IndexMap& bev_map,
                              const PointCloud& cloud) {
    if (static_cast<int>(front_probs.h) != front_map.rows ||
        static_cast<int>(front_probs.w) != front_map.cols)
        throw std::invalid_argument("front raster does not match the front index map");
    if (static_cast<int>(bev_probs.h) != bev_map.rows ||
        static_cast<int>(bev_probs.w) != bev_map.cols)
        throw std::invalid_argument("bev raster does not match the bev index map");
    if (front_map.pixel_of_point.size() != cloud.size() ||
        bev_map.pixel_of_point.size() != cloud.size())
        throw std::invalid_argument("index maps were built from a different cloud");

    SegmentationResult out;
    out.p_front.assign(cloud.size(), SegmentationResult::kAbsent);
    out.p_bev.assign(cloud.size(), SegmentationResult::kAbsent);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const int fp = front_map.pixel_of_point[i];
        if (fp >= 0) out.p_front[i] = front_probs.data[fp];
        const int bp = bev_map.pixel_of_point[i];
        if (bp >= 0) out.p_bev[i] = bev_probs.data[bp];
    }
    return out;
}

std::vector<Cluster> cluster_points(const PointCloud& cloud, const std::vector<int>& candidates,
                                    double link_dist) {
    if (link_dist <= 0.0) throw std::invalid_argument("link distance must be positive");
    // Normalize the candidate list so the smallest-member ordering holds for
    // any caller-side order.
    std::vector<int> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= static_cast<int>(cloud.size())))
        throw std::invalid_argument("candidate index out of range");
    const int n = static_cast<int>(sorted.size());
    std::vector<Eigen::Vector3d> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = cloud.points[sorted[i]].position().cast<double>();

    CellGrid grid(link_dist);
    for (int i = 0; i < n; ++i) grid.insert(pos[i], i);
    UnionFind uf(n);
    const double limit_sq = link_dist * link_dist;
    for (int i = 0; i < n; ++i) {
        grid.visit_neighbors(pos[i], [&](int j) {
            if (j <= i) return;
            if ((pos[i] - pos[j]).squaredNorm() <= limit_sq) uf.unite(i, j);
        });
    }

    // Group by root, ordered by each component's smallest candidate index.
    std::unordered_map<int, int> root_to_cluster;
    std::vector<Cluster> clusters;
    for (int i = 0; i < n; ++i) {
        const int root = uf.find(i);
        auto [it, fresh] = root_to_cluster.try_emplace(root, static_cast<int>(clusters.size()));
        if (fresh) clusters.emplace_back();
        clusters[it->second].indices.push_back(sorted[i]);
    }
    for (Cluster& c : clusters) {
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        for (int idx : c.indices) sum += cloud.points[idx].position().cast<double>();
        c.centroid = sum / static_cast<double>(c.indices.size());
    }
    return clusters;
}

void annotate_clusters(std::vector<Cluster>& clusters, const SegmentationResult& seg) {
    for (Cluster& c : clusters) {
        double front_sum = 0.0, bev_sum = 0.0;
        c.front_count = 0;
        c.bev_count = 0;
        for (int idx : c.indices) {
            if (seg.p_front[idx] >= 0.f) {
                front_sum += seg.p_front[idx];
                ++c.front_count;
            }
            if (seg.p_bev[idx] >= 0.f) {
                bev_sum += seg.p_bev[idx];
                ++c.bev_count;
            }
        }
        c.mean_p_front = c.front_count > 0 ? front_sum / c.front_count : 0.0;
        c.mean_p_bev = c.bev_count > 0 ? bev_sum / c.bev_count : 0.0;
    }
}

std::vector<Cluster> validate_clusters(const std::vector<Cluster>& clusters, int min_size,
                                       double score_threshold) {
    std::vector<Cluster> accepted;
    for (const Cluster& c : clusters) {
        if (static_cast<int>(c.indices.size()) < min_size) continue;
        const double score = 0.2 * (c.bev_count > 0 ? c.mean_p_bev : 0.0) +
                             0.1 * (c.front_count > 0 ? c.mean_p_front : 0.0);
        if (score >= score_threshold) accepted.push_back(c);
    }
    return accepted;
}

namespace {

std::vector<uint8_t> removal_mask(const PointCloud& cloud, const std::vector<int>& seed_indices,
                                  double radius) {
    if (radius < 0.0) throw std::invalid_argument("removal radius must be nonnegative");
    std::vector<uint8_t> removed(cloud.size(), 0);
    if (seed_indices.empty()) return removed;
    CellGrid grid(std::max(radius, 1e-6));
    for (int idx : seed_indices)
        grid.insert(cloud.points[idx].position().cast<double>(), idx);
    const double limit_sq = radius * radius;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d p = cloud.points[i].position().cast<double>();
        bool near = false;
        grid.visit_neighbors(p, [&](int j) {
            if (near) return;
            const Eigen::Vector3d q = cloud.points[j].position().cast<double>();
            if ((p - q).squaredNorm() <= limit_sq) near = true;
        });
        if (near) removed[i] = 1;
    }
    return removed;
}

PointCloud apply_mask(const PointCloud& cloud, const std::vector<uint8_t>& removed) {
    PointCloud out;
    out.frame_id = cloud.frame_id;
    for (size_t i = 0; i < cloud.size(); ++i)
        if (!removed[i]) out.points.push_back(cloud.points[i]);
    return out;
}

} // namespace

PointCloud radius_filter(const PointCloud& cloud, const std::vector<int>& seed_indices,
                         double radius) {
    return apply_mask(cloud, removal_mask(cloud, seed_indices, radius));
}

FilterResult filter_movable(const PointCloud& cloud, const SegmentationResult& seg,
                            const FilterParams& params) {
    if (seg.p_front.size() != cloud.size() || seg.p_bev.size() != cloud.size())
        throw std::invalid_argument("segmentation result does not match the cloud");
    std::vector<int> candidates;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const float best = std::max(seg.p_front[i], seg.p_bev[i]);
        if (best >= static_cast<float>(params.candidate_threshold)) candidates.push_back(static_cast<int>(i));
    }
    std::vector<Cluster> clusters = cluster_points(cloud, candidates, params.link_dist);
    annotate_clusters(clusters, seg);

    FilterResult result;
    result.accepted =
        validate_clusters(clusters, params.min_cluster_size, params.score_threshold);
    std::vector<int> seeds;
    for (const Cluster& c : result.accepted)
        seeds.insert(seeds.end(), c.indices.begin(), c.indices.end());
    result.removed = removal_mask(cloud, seeds, params.removal_radius);
    result.filtered = apply_mask(cloud, result.removed);
    return result;
}

} // namespace permaloc
