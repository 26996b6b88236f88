#pragma once

#include "permaloc/geometry.hpp"
#include "permaloc/projection.hpp"

#include <optional>
#include <vector>

namespace permaloc {

// Surface materials carry distinct reflectivities so material identity
// survives into the simulated clouds.
inline constexpr float kGroundReflectivity = 0.15f;
inline constexpr float kWallReflectivity = 0.40f;
inline constexpr float kPostReflectivity = 0.60f;
inline constexpr float kCarReflectivity = 0.80f;

struct WorldConfig {
    double lot_length = 40.0;      // interior x extent, m
    double lot_width = 26.0;       // interior y extent, m
    int slots_per_row = 10;        // parking slots along each long wall
    double slot_pitch = 3.0;       // slot spacing along x, m
    double occupancy = 0.5;        // probability a slot holds a car
    double position_jitter = 0.3;  // max car offset inside its slot, m
    double yaw_jitter_deg = 5.0;
    double wall_height = 2.5;
    double wall_thickness = 0.3;
    int post_count = 6;            // interior posts along the center line
    double rear_gap = 0.65;        // wall inner face to car rear bumper, m
    double sensor_height = 1.9;    // m above ground
    double max_range = 60.0;
    double noise_sigma = 0.02;     // raycast range noise, m
};

struct Post {
    double x = 0, y = 0;
    double radius = 0.15;
    double height = 2.5;
};

struct World {
    WorldConfig config;
    uint64_t world_seed = 0;
    uint64_t session_seed = 0;
    bool has_ground = true;                 // plane z = 0
    std::vector<Eigen::AlignedBox3d> walls; // axis-aligned, world frame
    std::vector<Post> posts;
    std::vector<BBox3D> cars;               // world frame, resting on the ground
    std::vector<int> car_slots;             // slot id per car, for set comparisons
};

// Statics depend only on world_seed; car placement on the seed pair.
World generate_world(const WorldConfig& config, uint64_t world_seed, uint64_t session_seed);

// Nearest-surface range along a single ray, double precision, pre-noise.
// Returns -1 when nothing is hit within config.max_range. reflectivity and
// car_index (into world.cars, -1 otherwise) identify the hit surface.
double raycast_range(const World& world, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     float* reflectivity = nullptr, int* car_index = nullptr);

// One full sweep: 64 elevation bins over [-24.8 deg, +2.0 deg] x 2000 azimuth
// steps of 0.18 deg, cast at bin centers from the sensor pose. The cloud and
// the visible car boxes (at least one hit) come back in the sensor frame;
// poses are yaw-only. Range noise is Gaussian with a fixed per-ray seed.
std::pair<PointCloud, std::vector<BBox3D>> simulate_scan(const World& world, const Pose& pose,
                                                         double noise_sigma, int frame_id = 0);

struct GpsFix {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double timestamp = 0.0;  // s, at the 10 Hz frame rate
    int frame = 0;
    bool valid = false;
};

// Emits a fix every `every`-th frame: ground-truth translation plus 2D
// Gaussian noise. Other frames return nothing.
std::optional<GpsFix> simulate_gps(const Pose& gt, int frame, double sigma = 3.0, int every = 10,
                                   uint64_t seed = 0);

// Counterclockwise rounded-rectangle loop in the z = height plane, heading
// tangent to the path, constant speed, closing after `loops` circuits.
std::vector<Pose> make_loop_trajectory(double half_length, double half_width, double corner_radius,
                                       int frames, double height, double phase = 0.0,
                                       int loops = 1);

// Fix file: one line per fix, "frame x y".
std::vector<GpsFix> read_gps(const std::string& path);
void write_gps(const std::string& path, const std::vector<GpsFix>& fixes);

} // namespace permaloc
