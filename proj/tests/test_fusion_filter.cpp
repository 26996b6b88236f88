#include "permaloc/fusion_filter.hpp"

#include "permaloc/rng.hpp"
#include "permaloc/synthetic_world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

using namespace permaloc;

namespace {

Point make_point(float x, float y, float z, float refl = 0.5f) {
    Point p;
    p.x = x;
    p.y = y;
    p.z = z;
    p.reflectivity = refl;
    return p;
}

PointCloud random_cloud(uint64_t seed, int n, double spread = 20.0) {
    Rng rng(seed);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
        cloud.points.push_back(make_point(static_cast<float>(rng.uniform(1.0, spread)),
                                          static_cast<float>(rng.uniform(-spread / 2, spread / 2)),
                                          static_cast<float>(rng.uniform(-1.5, 1.0))));
    }
    return cloud;
}

// Independent connected-components oracle: full distance matrix + BFS.
std::vector<std::vector<int>> brute_components(const PointCloud& cloud,
                                               const std::vector<int>& candidates, double link) {
    const int n = static_cast<int>(candidates.size());
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Eigen::Vector3d a = cloud.points[candidates[i]].position().cast<double>();
            const Eigen::Vector3d b = cloud.points[candidates[j]].position().cast<double>();
            if ((a - b).norm() <= link) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }
    std::vector<int> seen(n, 0);
    std::vector<std::vector<int>> comps;
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<int> comp, stack = {s};
        seen[s] = 1;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            comp.push_back(candidates[cur]);
            for (int nb : adj[cur])
                if (!seen[nb]) {
                    seen[nb] = 1;
                    stack.push_back(nb);
                }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(comp);
    }
    std::sort(comps.begin(), comps.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return comps;
}

} // namespace

TEST_CASE("fusing rasters assigns each point its own pixel's probability") {
    PointCloud cloud;
    cloud.points.push_back(make_point(10.f, 0.f, 0.f));   // both views
    cloud.points.push_back(make_point(65.f, 0.f, 0.f));   // front only: x beyond the bev extent
    cloud.points.push_back(make_point(-5.f, 0.f, 0.f));   // neither view
    const auto [front_img, front_map] = project_front(cloud);
    const auto [bev_img, bev_map] = project_bev(cloud);

    Raster front;
    front.h = FrontImage::kRows;
    front.w = FrontImage::kCols;
    front.data.assign(front.h * front.w, 0.8f);
    Raster bev;
    bev.h = BevImage::kRows;
    bev.w = BevImage::kCols;
    bev.data.assign(bev.h * bev.w, 0.3f);

    const SegmentationResult res = fuse_to_3d(front, bev, front_map, bev_map, cloud);
    CHECK(res.p_front[0] == 0.8f);
    CHECK(res.p_bev[0] == 0.3f);
    CHECK(res.p_front[1] == 0.8f);
    CHECK(res.p_bev[1] == SegmentationResult::kAbsent);
    CHECK(res.p_front[2] == SegmentationResult::kAbsent);
    CHECK(res.p_bev[2] == SegmentationResult::kAbsent);

    Raster wrong;
    wrong.h = 3;
    wrong.w = 3;
    wrong.data.assign(9, 0.f);
    CHECK_THROWS_AS(fuse_to_3d(wrong, bev, front_map, bev_map, cloud), std::invalid_argument);
}

TEST_CASE("fusion round-trips random rasters through the projections") {
    const PointCloud cloud = random_cloud(71, 700, 55.0);
    const auto [front_img, front_map] = project_front(cloud);
    const auto [bev_img, bev_map] = project_bev(cloud);
    Rng rng(72);
    Raster front;
    front.h = FrontImage::kRows;
    front.w = FrontImage::kCols;
    front.data.resize(front.h * front.w);
    for (float& v : front.data) v = static_cast<float>(rng.uniform());
    Raster bev;
    bev.h = BevImage::kRows;
    bev.w = BevImage::kCols;
    bev.data.resize(bev.h * bev.w);
    for (float& v : bev.data) v = static_cast<float>(rng.uniform());

    const SegmentationResult res = fuse_to_3d(front, bev, front_map, bev_map, cloud);
    for (size_t i = 0; i < cloud.size(); ++i) {
        // Recompute the pixel through the bin predicates as an independent path.
        const auto px = front_pixel_of(cloud.points[i]);
        if (px) {
            CHECK(res.p_front[i] == front.at(px->first, px->second));
        } else {
            CHECK(res.p_front[i] == SegmentationResult::kAbsent);
        }
        const auto cell = bev_cell_of(cloud.points[i]);
        if (cell) {
            CHECK(res.p_bev[i] == bev.at(cell->first, cell->second));
        } else {
            CHECK(res.p_bev[i] == SegmentationResult::kAbsent);
        }
    }
}

TEST_CASE("two nearby points form one cluster, distant points two") {
    PointCloud cloud;
    cloud.points.push_back(make_point(5.f, 0.f, 0.f));
    cloud.points.push_back(make_point(5.f, 0.3f, 0.f));
    auto clusters = cluster_points(cloud, {0, 1}, 0.5);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].indices == std::vector<int>({0, 1}));
    CHECK(clusters[0].centroid.y() == doctest::Approx(0.15));

    cloud.points[1] = make_point(5.f, 0.7f, 0.f);
    clusters = cluster_points(cloud, {0, 1}, 0.5);
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0].indices == std::vector<int>({0}));
    CHECK(clusters[1].indices == std::vector<int>({1}));
}

TEST_CASE("clustering matches a brute-force component search") {
    for (uint64_t seed : {81u, 82u, 83u}) {
        const PointCloud cloud = random_cloud(seed, 200, 12.0);
        std::vector<int> candidates;
        Rng rng(seed + 1000);
        for (int i = 0; i < static_cast<int>(cloud.size()); ++i)
            if (rng.uniform() < 0.8) candidates.push_back(i);
        const auto clusters = cluster_points(cloud, candidates, 0.5);
        const auto expected = brute_components(cloud, candidates, 0.5);
        REQUIRE(clusters.size() == expected.size());
        for (size_t c = 0; c < clusters.size(); ++c) CHECK(clusters[c].indices == expected[c]);
    }
}

TEST_CASE("cluster validation applies the size and score gates") {
    Cluster both;
    both.indices.resize(60);
    both.mean_p_front = 0.95;
    both.mean_p_bev = 0.95;
    both.front_count = 60;
    both.bev_count = 60;

    Cluster front_only = both;
    front_only.bev_count = 0;
    front_only.mean_p_bev = 0.0;

    Cluster small = both;
    small.indices.resize(40);

    const auto accepted = validate_clusters({both, front_only, small});
    REQUIRE(accepted.size() == 1);
    CHECK(accepted[0].indices.size() == 60);
    // Hand scores: 0.2*0.95 + 0.1*0.95 = 0.285; front-only 0.1*0.95 = 0.095.
    CHECK(0.2 * both.mean_p_bev + 0.1 * both.mean_p_front == doctest::Approx(0.285));
    CHECK(0.1 * front_only.mean_p_front == doctest::Approx(0.095));

    // A bev-only cluster passes: 0.2*0.95 = 0.19 >= 0.13.
    Cluster bev_only = both;
    bev_only.front_count = 0;
    bev_only.mean_p_front = 0.0;
    CHECK(validate_clusters({bev_only}).size() == 1);
}

TEST_CASE("radius filter removes seeds and their neighborhoods") {
    PointCloud cloud;
    cloud.points.push_back(make_point(1.f, 0.f, 0.f));
    cloud.points.push_back(make_point(1.f, 0.05f, 0.f));
    const PointCloud none = radius_filter(cloud, {});
    CHECK(none.size() == 2);
    const PointCloud emptied = radius_filter(cloud, {0});
    CHECK(emptied.empty());

    // Exactly at the radius is removed (inclusive boundary).
    PointCloud edge;
    edge.points.push_back(make_point(2.f, 0.f, 0.f));
    edge.points.push_back(make_point(2.1f, 0.f, 0.f));
    const double gap = (edge.points[1].position().cast<double>() -
                        edge.points[0].position().cast<double>())
                           .norm();
    const PointCloud boundary = radius_filter(edge, {0}, gap);
    CHECK(boundary.empty());
}

TEST_CASE("radius filter agrees with a brute-force distance test") {
    for (uint64_t seed : {91u, 92u, 93u}) {
        const PointCloud cloud = random_cloud(seed, 1000, 8.0);
        Rng rng(seed + 2000);
        std::vector<int> seeds;
        for (int i = 0; i < static_cast<int>(cloud.size()); ++i)
            if (rng.uniform() < 0.05) seeds.push_back(i);
        const PointCloud filtered = radius_filter(cloud, seeds, 0.10);

        std::vector<Point> expected;
        for (size_t i = 0; i < cloud.size(); ++i) {
            const Eigen::Vector3d p = cloud.points[i].position().cast<double>();
            bool near = false;
            for (int s : seeds) {
                const Eigen::Vector3d q = cloud.points[s].position().cast<double>();
                if ((p - q).norm() <= 0.10) {
                    near = true;
                    break;
                }
            }
            if (!near) expected.push_back(cloud.points[i]);
        }
        REQUIRE(filtered.size() == expected.size());
        for (size_t i = 0; i < expected.size(); ++i) {
            CHECK(filtered.points[i].x == expected[i].x);
            CHECK(filtered.points[i].y == expected[i].y);
            CHECK(filtered.points[i].z == expected[i].z);
        }
    }
}

// A box whose whole footprint lies inside the forward crop shared by both
// views. Boxes behind the sensor or outside the grid get no pixels in either
// view, so per-frame filtering cannot see them.
static bool box_in_view_coverage(const BBox3D& box) {
    for (int cx = -1; cx <= 1; cx += 2) {
        for (int cy = -1; cy <= 1; cy += 2) {
            const double lx = cx * box.size.x() / 2;
            const double ly = cy * box.size.y() / 2;
            const double wx = box.center.x() + lx * std::cos(box.yaw) - ly * std::sin(box.yaw);
            const double wy = box.center.y() + lx * std::sin(box.yaw) + ly * std::cos(box.yaw);
            if (wx < 0.3 || wx > 59.7 || std::abs(wy) > 24.7) return false;
        }
    }
    return true;
}

TEST_CASE("oracle-driven filtering removes cars and spares statics") {
    WorldConfig config;
    config.occupancy = 0.6;
    const World world = generate_world(config, 510, 511);
    // Sensor below car roof height: roofs are occluded by their own near
    // face, so every car return comes from a side face and stays within the
    // cluster linkage distance of its neighbours. A higher vantage point
    // sees sparse roof rings beyond ~12 m that detach from the car cluster.
    const Pose pose = Pose::from_yaw(0.2, {-6.0, 0.5, 1.4});
    const auto [cloud, boxes] = simulate_scan(world, pose, 0.02, 0);
    REQUIRE(cloud.size() > 10000);
    REQUIRE(!boxes.empty());

    const SegmentationResult seg = oracle_segment(cloud, boxes, 0.0, 15);
    const FilterResult result = filter_movable(cloud, seg);
    CHECK(result.filtered.size() < cloud.size());

    // Subset invariant via the removal flags.
    size_t kept = 0;
    for (uint8_t r : result.removed) kept += r ? 0 : 1;
    CHECK(kept == result.filtered.size());

    // Per-box removal: covered boxes with enough returns lose at least 99%
    // of them.
    int checked_boxes = 0;
    for (const BBox3D& box : boxes) {
        if (!box_in_view_coverage(box)) continue;
        int inside = 0, removed = 0;
        for (size_t i = 0; i < cloud.size(); ++i) {
            if (!box.contains(cloud.points[i].position().cast<double>())) continue;
            ++inside;
            removed += result.removed[i];
        }
        if (inside < 50) continue;
        ++checked_boxes;
        CHECK(static_cast<double>(removed) / inside >= 0.99);
    }
    REQUIRE(checked_boxes >= 3);

    // Static points beyond 0.2 m of every box: at most 1% removed. A point
    // outside a box grown 0.2 m per face is at least 0.2 m from that box.
    int statics = 0, statics_removed = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d p = cloud.points[i].position().cast<double>();
        bool near_any = false;
        for (const BBox3D& box : boxes) {
            BBox3D grown = box;
            grown.size += Eigen::Vector3d(0.4, 0.4, 0.4);
            if (grown.contains(p)) {
                near_any = true;
                break;
            }
        }
        if (near_any) continue;
        ++statics;
        statics_removed += result.removed[i];
    }
    REQUIRE(statics > 1000);
    CHECK(static_cast<double>(statics_removed) / statics <= 0.01);

    // Idempotence: re-segmenting and re-filtering the filtered cloud with the
    // same oracle removes nothing further.
    const SegmentationResult seg2 = oracle_segment(result.filtered, boxes, 0.0, 15);
    const FilterResult second = filter_movable(result.filtered, seg2);
    CHECK(second.filtered.size() == result.filtered.size());
}
