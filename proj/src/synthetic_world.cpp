#include "permaloc/synthetic_world.hpp"

#include "permaloc/parallel.hpp"
#include "permaloc/rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace permaloc {

namespace {

constexpr int kScanRows = 64;
constexpr int kScanCols = 2000;  // 360 deg / 0.18 deg
constexpr double kElevTopDeg = 2.0;
constexpr double kElevBottomDeg = -24.8;

// Slab intersection with an axis-aligned box; nearest positive hit or -1.
double ray_aabb(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                const Eigen::Vector3d& hi) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a]) return -1.0;
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a];
        double t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return -1.0;
    }
    return tmin > 1e-9 ? tmin : -1.0;
}

double ray_car(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const BBox3D& car) {
    const double c = std::cos(car.yaw), s = std::sin(car.yaw);
    // Rotate the ray into the box frame (inverse yaw).
    const Eigen::Vector3d od = o - car.center;
    const Eigen::Vector3d ob(c * od.x() + s * od.y(), -s * od.x() + c * od.y(), od.z());
    const Eigen::Vector3d db(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
    const Eigen::Vector3d half = car.size * 0.5;
    return ray_aabb(ob, db, -half, half);
}

double ray_post(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Post& post) {
    const double ox = o.x() - post.x, oy = o.y() - post.y;
    const double a = d.x() * d.x() + d.y() * d.y();
    if (a < 1e-15) return -1.0;
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double cc = ox * ox + oy * oy - post.radius * post.radius;
    const double disc = b * b - 4 * a * cc;
    if (disc < 0) return -1.0;
    const double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t > 1e-9) {
            const double z = o.z() + t * d.z();
            if (z >= 0.0 && z <= post.height) return t;
        }
    }
    return -1.0;
}

struct AzimuthBuckets {
    // Per azimuth column: indices into a combined primitive list
    // (walls, then posts, then cars).
    std::vector<std::vector<uint16_t>> columns;

    void mark(const Eigen::Vector2d& center, double bound_radius, const Eigen::Vector2d& origin,
              uint16_t id) {
        const Eigen::Vector2d d = center - origin;
        const double dist = d.norm();
        if (dist <= bound_radius + 1e-9) {
            for (auto& col : columns) col.push_back(id);
            return;
        }
        const double half = std::asin(std::min(1.0, bound_radius / dist));
        const double center_az = std::atan2(d.y(), d.x());
        const double step = 2.0 * M_PI / kScanCols;
        // Same column convention as the per-ray lookup: column 0 at -180 deg.
        // One extra column of margin on each side absorbs bin-center rounding.
        const int lo = static_cast<int>(std::floor((center_az - half + M_PI) / step)) - 1;
        const int hi = static_cast<int>(std::floor((center_az + half + M_PI) / step)) + 1;
        for (int c = lo; c <= hi; ++c) {
            const int wrapped = ((c % kScanCols) + kScanCols) % kScanCols;
            columns[wrapped].push_back(id);
        }
    }
};

} // namespace

World generate_world(const WorldConfig& config, uint64_t world_seed, uint64_t session_seed) {
    const double max_car_width = 1.85;
    if (config.slot_pitch < max_car_width + 2.0 * config.position_jitter + 0.1)
        throw std::invalid_argument("infeasible config: parking slots overlap at this pitch");
    if (config.slots_per_row * config.slot_pitch > config.lot_length)
        throw std::invalid_argument("infeasible config: slot row longer than the lot");
    if (config.occupancy < 0.0 || config.occupancy > 1.0)
        throw std::invalid_argument("occupancy must lie in [0, 1]");

    World world;
    world.config = config;
    world.world_seed = world_seed;
    world.session_seed = session_seed;

    const double hl = config.lot_length / 2.0;
    const double hw = config.lot_width / 2.0;
    const double t = config.wall_thickness;
    const double h = config.wall_height;
    world.walls.push_back({Eigen::Vector3d(-hl - t, -hw - t, 0), Eigen::Vector3d(hl + t, -hw, h)});
    world.walls.push_back({Eigen::Vector3d(-hl - t, hw, 0), Eigen::Vector3d(hl + t, hw + t, h)});
    world.walls.push_back({Eigen::Vector3d(-hl - t, -hw, 0), Eigen::Vector3d(-hl, hw, h)});
    world.walls.push_back({Eigen::Vector3d(hl, -hw, 0), Eigen::Vector3d(hl + t, hw, h)});

    Rng statics_rng(mix64(world_seed, 0x9d8f3c1a55aa77eeULL));
    for (int i = 0; i < config.post_count; ++i) {
        Post p;
        const double span = config.lot_length - 8.0;
        p.x = (config.post_count > 1 ? (i - (config.post_count - 1) / 2.0) * span / config.post_count
                                     : 0.0) +
              statics_rng.uniform(-0.5, 0.5);
        p.y = statics_rng.uniform(-1.0, 1.0);
        p.height = config.wall_height;
        world.posts.push_back(p);
    }

    Rng car_rng(mix64(splitmix64(world_seed), session_seed));
    const double yaw_jitter = config.yaw_jitter_deg * M_PI / 180.0;
    for (int row = 0; row < 2; ++row) {
        for (int i = 0; i < config.slots_per_row; ++i) {
            // Fixed draw count per slot keeps downstream slots identical when
            // one slot's occupancy flips between sessions.
            const double u_occ = car_rng.uniform();
            const double jx = car_rng.uniform(-config.position_jitter, config.position_jitter);
            const double jy = car_rng.uniform(-config.position_jitter, config.position_jitter);
            const double jyaw = car_rng.uniform(-yaw_jitter, yaw_jitter);
            const double len = 4.3 + 0.4 * car_rng.uniform();
            const double wid = 1.75 + 0.1 * car_rng.uniform();
            const double hgt = 1.45 + 0.1 * car_rng.uniform();
            if (u_occ >= config.occupancy) continue;
            BBox3D car;
            const double x = (i - (config.slots_per_row - 1) / 2.0) * config.slot_pitch + jx;
            const double y_mag = hw - config.rear_gap - len / 2.0;
            car.center = {x, row == 0 ? y_mag + jy : -y_mag + jy, hgt / 2.0};
            car.size = {wid, len, hgt};  // long axis along y: perpendicular parking
            car.yaw = jyaw;
            car.label = "Car";
            world.cars.push_back(car);
            world.car_slots.push_back(row * config.slots_per_row + i);
        }
    }

    for (const BBox3D& car : world.cars) {
        const double bound = 0.5 * std::hypot(car.size.x(), car.size.y());
        for (const auto& wall : world.walls) {
            if (wall.exteriorDistance(car.center) < bound - 1e-9) {
                // Conservative bound triggered: run the exact corner test.
                const double c = std::cos(car.yaw), s = std::sin(car.yaw);
                bool inside = false;
                for (int cx = -1; cx <= 1; cx += 2) {
                    for (int cy = -1; cy <= 1; cy += 2) {
                        const double lx = cx * car.size.x() / 2, ly = cy * car.size.y() / 2;
                        const Eigen::Vector3d corner(car.center.x() + c * lx - s * ly,
                                                     car.center.y() + s * lx + c * ly, car.center.z());
                        if (wall.contains(corner)) inside = true;
                    }
                }
                if (inside) throw std::invalid_argument("infeasible config: car intersects a wall");
            }
        }
        for (const Post& post : world.posts) {
            const double d = std::hypot(post.x - car.center.x(), post.y - car.center.y());
            if (d < bound + post.radius)
                throw std::invalid_argument("infeasible config: car intersects a post");
        }
    }
    return world;
}

double raycast_range(const World& world, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     float* reflectivity, int* car_index) {
    double best = std::numeric_limits<double>::infinity();
    float refl = 0.f;
    int car_hit = -1;
    if (world.has_ground && dir.z() < -1e-15) {
        const double t = -origin.z() / dir.z();
        if (t > 1e-9 && t < best) {
            best = t;
            refl = kGroundReflectivity;
        }
    }
    for (const auto& wall : world.walls) {
        const double t = ray_aabb(origin, dir, wall.min(), wall.max());
        if (t > 0 && t < best) {
            best = t;
            refl = kWallReflectivity;
        }
    }
    for (const Post& post : world.posts) {
        const double t = ray_post(origin, dir, post);
        if (t > 0 && t < best) {
            best = t;
            refl = kPostReflectivity;
        }
    }
    for (size_t i = 0; i < world.cars.size(); ++i) {
        const double t = ray_car(origin, dir, world.cars[i]);
        if (t > 0 && t < best) {
            best = t;
            refl = kCarReflectivity;
            car_hit = static_cast<int>(i);
        }
    }
    if (!(best <= world.config.max_range)) return -1.0;
    if (reflectivity) *reflectivity = refl;
    if (car_index) *car_index = car_hit;
    return best;
}

std::pair<PointCloud, std::vector<BBox3D>> simulate_scan(const World& world, const Pose& pose,
                                                         double noise_sigma, int frame_id) {
    if (pose.translation.z() <= 0.0)
        throw std::invalid_argument("sensor pose must be above the ground plane");

    const Eigen::Vector3d origin = pose.translation;
    const Eigen::Vector2d origin2(origin.x(), origin.y());

    // Combined primitive list for azimuth culling: walls, posts, cars.
    AzimuthBuckets buckets;
    buckets.columns.resize(kScanCols);
    uint16_t id = 0;
    for (const auto& wall : world.walls) {
        const Eigen::Vector3d c = wall.center();
        const Eigen::Vector3d half = 0.5 * (wall.max() - wall.min());
        buckets.mark({c.x(), c.y()}, std::hypot(half.x(), half.y()), origin2, id++);
    }
    for (const Post& post : world.posts) buckets.mark({post.x, post.y}, post.radius, origin2, id++);
    for (const BBox3D& car : world.cars) {
        buckets.mark({car.center.x(), car.center.y()},
                     0.5 * std::hypot(car.size.x(), car.size.y()), origin2, id++);
    }
    const int wall_count = static_cast<int>(world.walls.size());
    const int post_count = static_cast<int>(world.posts.size());

    double elev_sin[kScanRows], elev_cos[kScanRows];
    for (int i = 0; i < kScanRows; ++i) {
        const double span = kElevTopDeg - kElevBottomDeg;
        const double deg = kElevTopDeg - span * (i + 0.5) / kScanRows;
        elev_sin[i] = std::sin(deg * M_PI / 180.0);
        elev_cos[i] = std::cos(deg * M_PI / 180.0);
    }

    const uint64_t noise_seed = mix64(world.session_seed, 0x5eedULL + frame_id);
    std::vector<std::vector<Point>> row_points(kScanRows);
    std::vector<std::vector<int>> row_car_hits(kScanRows);

    parallel_for(kScanRows, [&](int row_begin, int row_end) {
        for (int i = row_begin; i < row_end; ++i) {
            auto& out = row_points[i];
            auto& car_hits = row_car_hits[i];
            for (int j = 0; j < kScanCols; ++j) {
                const double az_sensor = (-180.0 + 360.0 * (j + 0.5) / kScanCols) * M_PI / 180.0;
                const Eigen::Vector3d d_sensor(elev_cos[i] * std::cos(az_sensor),
                                               elev_cos[i] * std::sin(az_sensor), elev_sin[i]);
                const Eigen::Vector3d d_world = pose.rotation * d_sensor;

                const double az_world = std::atan2(d_world.y(), d_world.x());
                int col = static_cast<int>(std::floor((az_world + M_PI) / (2.0 * M_PI) * kScanCols));
                col = ((col % kScanCols) + kScanCols) % kScanCols;

                double best = std::numeric_limits<double>::infinity();
                float refl = 0.f;
                int car_hit = -1;
                if (world.has_ground && d_world.z() < -1e-15) {
                    const double t = -origin.z() / d_world.z();
                    if (t > 1e-9) {
                        best = t;
                        refl = kGroundReflectivity;
                    }
                }
                for (uint16_t cand : buckets.columns[col]) {
                    double t = -1.0;
                    float r = 0.f;
                    int car = -1;
                    if (cand < wall_count) {
                        const auto& wall = world.walls[cand];
                        t = ray_aabb(origin, d_world, wall.min(), wall.max());
                        r = kWallReflectivity;
                    } else if (cand < wall_count + post_count) {
                        t = ray_post(origin, d_world, world.posts[cand - wall_count]);
                        r = kPostReflectivity;
                    } else {
                        car = cand - wall_count - post_count;
                        t = ray_car(origin, d_world, world.cars[car]);
                        r = kCarReflectivity;
                    }
                    if (t > 0 && t < best) {
                        best = t;
                        refl = r;
                        car_hit = car;
                    }
                }
                if (!(best <= world.config.max_range)) continue;

                const int ray_index = i * kScanCols + j;
                const double eps =
                    noise_sigma > 0 ? noise_sigma * indexed_gaussian(noise_seed, ray_index) : 0.0;
                const double rho = best + eps;
                if (rho <= 1e-3) continue;
                out.emplace_back(static_cast<float>(rho * d_sensor.x()),
                                 static_cast<float>(rho * d_sensor.y()),
                                 static_cast<float>(rho * d_sensor.z()), refl);
                if (car_hit >= 0) car_hits.push_back(car_hit);
            }
        }
    });

    PointCloud cloud;
    cloud.frame_id = frame_id;
    std::vector<uint8_t> car_seen(world.cars.size(), 0);
    for (int i = 0; i < kScanRows; ++i) {
        cloud.points.insert(cloud.points.end(), row_points[i].begin(), row_points[i].end());
        for (int c : row_car_hits[i]) car_seen[c] = 1;
    }

    const Pose inv = pose.inverse();
    std::vector<BBox3D> visible;
    for (size_t i = 0; i < world.cars.size(); ++i) {
        if (!car_seen[i]) continue;
        BBox3D box = world.cars[i];
        box.center = inv.apply(box.center);
        box.yaw -= pose.yaw();
        box.frame = frame_id;
        visible.push_back(box);
    }
    return {std::move(cloud), std::move(visible)};
}

std::optional<GpsFix> simulate_gps(const Pose& gt, int frame, double sigma, int every,
                                   uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("gps sigma must be non-negative");
    if (every < 1) throw std::invalid_argument("gps rate divisor must be positive");
    if (frame % every != 0) return std::nullopt;
    GpsFix fix;
    fix.frame = frame;
    fix.timestamp = frame * 0.1;
    fix.valid = true;
    const uint64_t s = mix64(seed, 0x6a09e667f3bcc909ULL + frame);
    fix.position = {gt.translation.x() + sigma * indexed_gaussian(s, 0),
                    gt.translation.y() + sigma * indexed_gaussian(s, 1)};
    return fix;
}

std::vector<Pose> make_loop_trajectory(double half_length, double half_width, double corner_radius,
                                       int frames, double height, double phase, int loops) {
    if (corner_radius <= 0 || corner_radius > std::min(half_length, half_width))
        throw std::invalid_argument("corner radius must lie in (0, min(half extents)]");
    if (frames < 1) throw std::invalid_argument("frame count must be positive");
    const double a = half_length, b = half_width, r = corner_radius;
    const double sx = 2.0 * (a - r);  // straight lengths
    const double sy = 2.0 * (b - r);
    const double arc = 0.5 * M_PI * r;
    const double total = 2 * sx + 2 * sy + 4 * arc;
    const double seg_end[8] = {sx,
                               sx + arc,
                               sx + arc + sy,
                               sx + 2 * arc + sy,
                               2 * sx + 2 * arc + sy,
                               2 * sx + 3 * arc + sy,
                               2 * sx + 3 * arc + 2 * sy,
                               total};

    std::vector<Pose> out;
    out.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        double s = std::fmod(phase * total + total * loops * f / frames, total);
        if (s < 0) s += total;
        int seg = 0;
        while (seg < 7 && s >= seg_end[seg]) ++seg;
        const double s0 = seg == 0 ? 0.0 : seg_end[seg - 1];
        const double u = s - s0;
        double x = 0, y = 0, heading = 0;
        switch (seg) {
            case 0:  // bottom straight, heading +x
                x = -(a - r) + u, y = -b, heading = 0;
                break;
            case 1: {  // bottom-right arc
                const double ang = -M_PI / 2 + u / r;
                x = (a - r) + r * std::cos(ang), y = -(b - r) + r * std::sin(ang);
                heading = ang + M_PI / 2;
                break;
            }
            case 2:  // right straight, heading +y
                x = a, y = -(b - r) + u, heading = M_PI / 2;
                break;
            case 3: {
                const double ang = u / r;
                x = (a - r) + r * std::cos(ang), y = (b - r) + r * std::sin(ang);
                heading = ang + M_PI / 2;
                break;
            }
            case 4:  // top straight, heading -x
                x = (a - r) - u, y = b, heading = M_PI;
                break;
            case 5: {
                const double ang = M_PI / 2 + u / r;
                x = -(a - r) + r * std::cos(ang), y = (b - r) + r * std::sin(ang);
                heading = ang + M_PI / 2;
                break;
            }
            case 6:  // left straight, heading -y
                x = -a, y = (b - r) - u, heading = -M_PI / 2;
                break;
            default: {
                const double ang = M_PI + u / r;
                x = -(a - r) + r * std::cos(ang), y = -(b - r) + r * std::sin(ang);
                heading = ang + M_PI / 2;
                break;
            }
        }
        out.push_back(Pose::from_yaw(heading, {x, y, height}));
    }
    return out;
}

std::vector<GpsFix> read_gps(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<GpsFix> fixes;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        GpsFix f;
        double x, y;
        if (!(ss >> f.frame >> x >> y))
            throw std::runtime_error("malformed file " + path + ": line " + std::to_string(line_no));
        f.position = {x, y};
        f.timestamp = f.frame * 0.1;
        f.valid = true;
        fixes.push_back(f);
    }
    return fixes;
}

void write_gps(const std::string& path, const std::vector<GpsFix>& fixes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    out.precision(9);
    for (const GpsFix& f : fixes) out << f.frame << ' ' << f.position.x() << ' ' << f.position.y() << '\n';
    if (!out) throw std::runtime_error("malformed file " + path + ": short write");
}

} // namespace permaloc
