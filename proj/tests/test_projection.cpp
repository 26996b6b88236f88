#include <doctest.h>

#include "permaloc/projection.hpp"
#include "permaloc/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace permaloc;

namespace {

PointCloud random_front_cloud(Rng& rng, int n) {
    // Draw in spherical coordinates so most points land inside the front crop.
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        const double azim = rng.uniform(-50, 50) * M_PI / 180.0;
        const double elev = rng.uniform(-30, 8) * M_PI / 180.0;
        const double rho = rng.uniform(0.5, 70);
        Point p;
        p.x = static_cast<float>(rho * std::cos(elev) * std::cos(azim));
        p.y = static_cast<float>(rho * std::cos(elev) * std::sin(azim));
        p.z = static_cast<float>(rho * std::sin(elev));
        p.reflectivity = static_cast<float>(rng.uniform(0, 1));
        c.points.push_back(p);
    }
    return c;
}

} // namespace

TEST_CASE("front projection bin indices") {
    PointCloud c;
    c.points.push_back({10, 0, 0, 0.5f});
    const auto pix = front_pixel_of(c.points[0]);
    REQUIRE(pix.has_value());
    CHECK(pix->first == 4);
    CHECK(pix->second == 224);

    Point high{10, 0, 10, 0};  // +45 deg elevation, outside the vertical span
    CHECK_FALSE(front_pixel_of(high).has_value());

    Point behind{-10, 0, 0, 0};
    CHECK_FALSE(front_pixel_of(behind).has_value());

    Point origin{0, 0, 0, 0};
    CHECK_FALSE(front_pixel_of(origin).has_value());
}

TEST_CASE("front collision keeps the nearest range and lists both points") {
    PointCloud c;
    c.points.push_back({8, 0, 0, 0.9f});
    c.points.push_back({5, 0, 0, 0.2f});
    const auto [img, map] = project_front(c);
    const auto pix = *front_pixel_of(c.points[0]);
    CHECK(pix == *front_pixel_of(c.points[1]));
    const int flat = FrontImage::index(pix.first, pix.second);
    CHECK(img.validity[flat] == 1);
    CHECK(img.range[flat] == doctest::Approx(5.0));
    CHECK(img.reflectivity[flat] == doctest::Approx(0.2));
    const auto [begin, end] = map.at(pix.first, pix.second);
    CHECK(end - begin == 2);
}

TEST_CASE("front back-projection consistency on random clouds") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud c = random_front_cloud(rng, 500);
        const auto [img, map] = project_front(c);
        size_t listed = 0;
        for (int r = 0; r < FrontImage::kRows; ++r) {
            for (int col = 0; col < FrontImage::kCols; ++col) {
                const auto [begin, end] = map.at(r, col);
                listed += end - begin;
                if (begin != end) CHECK(img.validity[FrontImage::index(r, col)] == 1);
                for (const int* it = begin; it != end; ++it) {
                    REQUIRE(*it >= 0);
                    REQUIRE(*it < static_cast<int>(c.size()));
                    const auto pix = front_pixel_of(c.points[*it]);
                    REQUIRE(pix.has_value());
                    CHECK(pix->first == r);
                    CHECK(pix->second == col);
                }
            }
        }
        size_t in_crop = 0;
        for (const Point& p : c.points)
            if (front_pixel_of(p)) ++in_crop;
        CHECK(listed == in_crop);

        for (int flat = 0; flat < FrontImage::kRows * FrontImage::kCols; ++flat) {
            if (img.validity[flat]) {
                CHECK(img.range[flat] > 0.f);
            } else {
                CHECK(img.range[flat] == 0.f);
                CHECK(img.reflectivity[flat] == 0.f);
            }
        }
    }
}

TEST_CASE("bev single point statistics") {
    PointCloud c;
    c.points.push_back({10.05f, 0.0f, 1.3f, 0.5f});
    const auto [img, map] = project_bev(c);
    const auto cell = bev_cell_of(c.points[0]);
    REQUIRE(cell.has_value());
    const int flat = BevImage::index(cell->first, cell->second);
    CHECK(img.binary[flat] == 1.f);
    CHECK(img.count[flat] == 1.f);
    CHECK(img.mean_reflectivity[flat] == doctest::Approx(0.5));
    CHECK(img.mean_height[flat] == doctest::Approx(1.3));
    CHECK(img.min_height[flat] == doctest::Approx(1.3));
    CHECK(img.max_height[flat] == doctest::Approx(1.3));
    float occupied = 0;
    for (float b : img.binary) occupied += b;
    CHECK(occupied == 1.f);

    Point far{61.f, 0.f, 0.f, 0.f};
    CHECK_FALSE(bev_cell_of(far).has_value());
}

TEST_CASE("bev cell statistics over three stacked points") {
    PointCloud c;
    c.points.push_back({10.01f, 0.01f, 0.1f, 0.3f});
    c.points.push_back({10.02f, 0.02f, 0.5f, 0.6f});
    c.points.push_back({10.03f, 0.03f, 0.9f, 0.9f});
    const auto [img, map] = project_bev(c);
    const int flat = BevImage::index(bev_cell_of(c.points[0])->first, bev_cell_of(c.points[0])->second);
    CHECK(img.count[flat] == 3.f);
    CHECK(img.mean_height[flat] == doctest::Approx(0.5));
    CHECK(img.min_height[flat] == doctest::Approx(0.1));
    CHECK(img.max_height[flat] == doctest::Approx(0.9));
    CHECK(img.mean_reflectivity[flat] == doctest::Approx(0.6));
}

TEST_CASE("bev channel invariants on random clouds") {
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        PointCloud c;
        for (int i = 0; i < 800; ++i) {
            c.points.push_back({static_cast<float>(rng.uniform(-5, 70)),
                                static_cast<float>(rng.uniform(-30, 30)),
                                static_cast<float>(rng.uniform(-2, 3)),
                                static_cast<float>(rng.uniform(0, 1))});
        }
        const auto [img, map] = project_bev(c);
        for (int flat = 0; flat < BevImage::kRows * BevImage::kCols; ++flat) {
            if (img.count[flat] > 0.f) {
                CHECK(img.binary[flat] == 1.f);
                CHECK(img.min_height[flat] <= img.mean_height[flat] + 1e-5f);
                CHECK(img.mean_height[flat] <= img.max_height[flat] + 1e-5f);
            } else {
                CHECK(img.binary[flat] == 0.f);
                CHECK(img.mean_reflectivity[flat] == 0.f);
                CHECK(img.mean_height[flat] == 0.f);
            }
        }
        for (int flat = 0; flat < BevImage::kRows * BevImage::kCols; ++flat) {
            const int row = flat / BevImage::kCols, col = flat % BevImage::kCols;
            const auto [begin, end] = map.at(row, col);
            CHECK(static_cast<float>(end - begin) == img.count[flat]);
            for (const int* it = begin; it != end; ++it) {
                const auto cell = bev_cell_of(c.points[*it]);
                REQUIRE(cell.has_value());
                CHECK(BevImage::index(cell->first, cell->second) == flat);
            }
        }
    }
}

TEST_CASE("box containment") {
    BBox3D box;
    box.center = {10, 0, 0.8};
    box.size = {4, 2, 1.6};
    box.yaw = 0;
    CHECK(box.contains({10, 0, 0.8}));
    CHECK_FALSE(box.contains({13, 0, 0.8}));
    CHECK(box.contains({12, 0, 0.8}));  // on the boundary, inclusive

    BBox3D rot = box;
    rot.yaw = M_PI / 2.0;
    CHECK(rot.contains(rot.center + Eigen::Vector3d(0, 1.9, 0)));
    CHECK_FALSE(rot.contains(rot.center + Eigen::Vector3d(1.9, 0, 0)));
}

TEST_CASE("gt masks mark only pixels containing movable points") {
    PointCloud c;
    c.points.push_back({10, 0, -0.8f, 0.5f});  // inside the box
    c.points.push_back({20, 3, -0.2f, 0.5f});  // outside
    BBox3D box;
    box.center = {10, 0, -0.8};
    box.size = {4, 2, 1.6};
    const GtMasks masks = gen_gt_masks(c, {box});
    REQUIRE(masks.point_labels.size() == 2);
    CHECK(masks.point_labels[0] == 1);
    CHECK(masks.point_labels[1] == 0);

    const auto pix = *front_pixel_of(c.points[0]);
    CHECK(masks.front.at(pix.first, pix.second) == 1.f);
    float front_sum = 0;
    for (float v : masks.front.data) front_sum += v;
    CHECK(front_sum == 1.f);
    const auto cell = *bev_cell_of(c.points[0]);
    CHECK(masks.bev.at(cell.first, cell.second) == 1.f);
}

TEST_CASE("gt labels invariant under a rigid transform of cloud and boxes") {
    Rng rng(31);
    PointCloud c = random_front_cloud(rng, 300);
    std::vector<BBox3D> boxes;
    for (int i = 0; i < 4; ++i) {
        BBox3D b;
        b.center = {rng.uniform(5, 40), rng.uniform(-10, 10), rng.uniform(-1, 1)};
        b.size = {4.5, 1.8, 1.5};
        b.yaw = rng.uniform(-M_PI, M_PI);
        boxes.push_back(b);
        c.points.push_back({static_cast<float>(b.center.x()), static_cast<float>(b.center.y()),
                            static_cast<float>(b.center.z() + 0.2), 0.4f});
    }
    const GtMasks before = gen_gt_masks(c, boxes);
    const Pose t = Pose::from_yaw(0.7, {3, -2, 0.5});
    const PointCloud moved = pose_apply(t, c);
    std::vector<BBox3D> moved_boxes = boxes;
    for (BBox3D& b : moved_boxes) {
        b.center = t.apply(b.center);
        b.yaw += 0.7;
    }
    const GtMasks after = gen_gt_masks(moved, moved_boxes);
    size_t moved_count = 0;
    for (size_t i = 0; i < c.size(); ++i) {
        // Skip points within float rounding of a box face; the transform can
        // legitimately flip an inclusive boundary test there.
        bool near_face = false;
        for (const auto& b : boxes) {
            const double cs = std::cos(b.yaw), sn = std::sin(b.yaw);
            const Eigen::Vector3d d = c.points[i].position() - b.center;
            const double lx = std::abs(cs * d.x() + sn * d.y());
            const double ly = std::abs(-sn * d.x() + cs * d.y());
            const double lz = std::abs(d.z());
            if (std::abs(lx - b.size.x() / 2) < 1e-4 || std::abs(ly - b.size.y() / 2) < 1e-4 ||
                std::abs(lz - b.size.z() / 2) < 1e-4)
                near_face = true;
        }
        if (near_face) continue;
        CHECK(before.point_labels[i] == after.point_labels[i]);
        moved_count += before.point_labels[i];
    }
    CHECK(moved_count > 0);  // the fixture actually exercises both label values
}

TEST_CASE("box file round trip") {
    std::vector<BBox3D> boxes;
    BBox3D b;
    b.frame = 7;
    b.label = "Pedestrian";
    b.center = {1.25, -3.5, 0.9};
    b.size = {0.6, 0.6, 1.7};
    b.yaw = 0.3125;
    boxes.push_back(b);
    const std::string path =
        (std::filesystem::temp_directory_path() / "permaloc_boxes.txt").string();
    write_boxes(path, boxes);
    const auto back = read_boxes(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].frame == 7);
    CHECK(back[0].label == "Pedestrian");
    CHECK((back[0].center - boxes[0].center).norm() < 1e-9);
    CHECK((back[0].size - boxes[0].size).norm() < 1e-9);
    CHECK(back[0].yaw == doctest::Approx(0.3125));
    std::filesystem::remove(path);
}

TEST_CASE("coverage crop keeps points either view can see") {
    PointCloud cloud;
    cloud.frame_id = 9;
    cloud.points.push_back(Point(10.f, 0.f, 0.f));    // both views
    cloud.points.push_back(Point(65.f, 0.f, 0.f));    // front only
    cloud.points.push_back(Point(0.5f, 20.f, -1.f));  // bird's-eye only
    cloud.points.push_back(Point(-5.f, 0.f, 0.f));    // neither
    cloud.points.push_back(Point(-1.f, 3.f, 0.5f));   // neither

    const PointCloud cropped = crop_to_coverage(cloud);
    CHECK(cropped.frame_id == 9);
    REQUIRE(cropped.size() == 3);
    CHECK(cropped.points[0].x == 10.f);
    CHECK(cropped.points[1].x == 65.f);
    CHECK(cropped.points[2].y == 20.f);

    for (const Point& p : cropped.points)
        CHECK((front_pixel_of(p).has_value() || bev_cell_of(p).has_value()));
}
