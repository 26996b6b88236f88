#pragma once

#include "permaloc/mapping.hpp"
#include "permaloc/odometry.hpp"
#include "permaloc/synthetic_world.hpp"

#include <optional>
#include <string>
#include <vector>

namespace permaloc {

enum class RelocKind { initial, continuous };

struct RelocEvent {
    int frame = 0;
    RelocKind kind = RelocKind::continuous;
    Pose before = Pose::identity();
    Pose after = Pose::identity();
    double fitting_score = 0.0;
    bool accepted = false;
};

struct SessionConfig {
    bool reloc = true;    // attempt continuous re-localization every frame
    bool filter = false;  // remove movables from query frames before features
    Segmenter segmenter;  // consulted only when filter is true

    double initial_score_max = 0.4;
    double continuous_score_max = 0.3;

    // Corrections larger than this are rejected as erroneous even when the
    // score passes: a slightly wrong orientation lock can move the pose far.
    bool sanity_gate = true;
    double max_correction_m = 5.0;
    double max_correction_deg = 15.0;

    double submap_radius = 60.0;

    // The sweep starts up to several metres off (GPS noise), so its gate must
    // admit those first pairings; continuous correction starts near the map.
    // The wide gate keeps many marginal pairings churning, so the step sizes
    // shrink slowly and the sweep needs far more iterations than tracking.
    IcpParams initial_icp{.max_iterations = 100, .rejection_dist = 6.0};
    IcpParams continuous_icp{.rejection_dist = 2.0};
    // Consecutive frames of one session see the same content, so a wider gate
    // mostly admits true pairings; the stock tracking gate starves the frames
    // where a turn begins and the constant-motion prior lags the yaw rate.
    IcpParams odometry_icp{.rejection_dist = 2.0};
};

// Winning rotation-sweep entry. The pose already folds the GPS translation,
// the trial rotation, and the ICP refinement together.
struct InitialEstimate {
    Pose pose = Pose::identity();
    double fitting_score = 0.0;
    int yaw_bin = 0;  // degrees, one of 0,45,...,315
};

// Tries ICP from the GPS position at eight 45-degree headings and keeps the
// best converged fit if its score beats the threshold. The 2D fix carries no
// height, so trials start at z = 0 and ICP recovers the height against the
// map. Returns nothing when the submap is empty or every trial fails.
std::optional<InitialEstimate> initial_pose_estimate(const FeatureSet& features,
                                                     const MapStore& map,
                                                     const Eigen::Vector2d& gps,
                                                     const SessionConfig& config = {});

// GPS-free fallback: repeats the sweep over a 10 m grid spanning the map and
// returns the best accepted estimate across all grid positions.
std::optional<InitialEstimate> initial_pose_estimate_grid(const FeatureSet& features,
                                                          const MapStore& map,
                                                          const SessionConfig& config = {});

struct RelocOutcome {
    std::optional<Pose> pose;  // corrected pose when accepted
    RelocEvent event;          // emitted for every attempt, accepted or not
};

// One continuous re-localization attempt: ICP against the submap around the
// current pose, accepted when it converged, scored under the threshold, and
// stayed inside the sanity gate.
RelocOutcome relocalize_step(const FeatureSet& features, const MapStore& map, const Pose& current,
                             const SessionConfig& config = {});

struct SessionResult {
    std::vector<Pose> trajectory;  // one pose per input frame
    std::vector<RelocEvent> events;
};

// Replays a session against a prebuilt map. Until the initial estimate
// succeeds the trajectory holds the latest GPS position with identity
// heading; afterwards each frame chains odometry and, when enabled,
// continuous re-localization, an accepted correction replacing the pose.
// Pose updates stay planar: yaw and horizontal position move freely, height
// rides along from the accepted estimates.
SessionResult run_session(const std::vector<SessionFrame>& frames, const MapStore& map,
                          const std::vector<std::optional<GpsFix>>& gps,
                          const SessionConfig& config = {});

// Event log: one line per event, "frame kind accepted score" then the pose
// after as 12 floats ([R|t] rows), space-delimited.
void write_events(const std::string& path, const std::vector<RelocEvent>& events);
std::vector<RelocEvent> read_events(const std::string& path);

} // namespace permaloc
