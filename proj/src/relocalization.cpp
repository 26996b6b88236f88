#include "permaloc/relocalization.hpp"

#include "permaloc/fusion_filter.hpp"
#include "permaloc/loam_features.hpp"
#include "permaloc/projection.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace permaloc {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

bool within_sanity(const Pose& before, const Pose& after, const SessionConfig& config) {
    if (!config.sanity_gate) return true;
    const Pose correction = pose_compose(after, before.inverse());
    return correction.translation.norm() <= config.max_correction_m &&
           rotation_angle(correction.rotation) <= config.max_correction_deg * kDegToRad;
}

std::optional<InitialEstimate> sweep_at(const FeatureSet& features, const IndexedCloud& submap,
                                        const Eigen::Vector2d& position,
                                        const SessionConfig& config) {
    std::optional<InitialEstimate> best;
    for (int bin = 0; bin < 360; bin += 45) {
        const Pose init =
            Pose::from_yaw(bin * kDegToRad, {position.x(), position.y(), 0.0});
        const IcpResult result = icp_register(features, submap, init, config.initial_icp);
        if (!result.converged) continue;
        if (best && result.fitting_score >= best->fitting_score) continue;
        best = InitialEstimate{result.transform, result.fitting_score, bin};
    }
    if (best && best->fitting_score < config.initial_score_max) return best;
    return std::nullopt;
}

} // namespace

std::optional<InitialEstimate> initial_pose_estimate(const FeatureSet& features,
                                                     const MapStore& map,
                                                     const Eigen::Vector2d& gps,
                                                     const SessionConfig& config) {
    const auto submap =
        extract_submap(map, {gps.x(), gps.y(), 0.0}, config.submap_radius);
    if (!submap) return std::nullopt;
    return sweep_at(features, *submap, gps, config);
}

std::optional<InitialEstimate> initial_pose_estimate_grid(const FeatureSet& features,
                                                          const MapStore& map,
                                                          const SessionConfig& config) {
    if (map.size() == 0) return std::nullopt;
    double min_x = std::numeric_limits<double>::max();
    double max_x = std::numeric_limits<double>::lowest();
    double min_y = min_x;
    double max_y = max_x;
    for (const Point& p : map.points.points) {
        min_x = std::min(min_x, double(p.x));
        max_x = std::max(max_x, double(p.x));
        min_y = std::min(min_y, double(p.y));
        max_y = std::max(max_y, double(p.y));
    }

    std::optional<InitialEstimate> best;
    for (double gx = min_x; gx <= max_x + 1e-9; gx += 10.0) {
        for (double gy = min_y; gy <= max_y + 1e-9; gy += 10.0) {
            const auto candidate = initial_pose_estimate(features, map, {gx, gy}, config);
            if (!candidate) continue;
            if (best && candidate->fitting_score >= best->fitting_score) continue;
            best = candidate;
        }
    }
    return best;
}

RelocOutcome relocalize_step(const FeatureSet& features, const MapStore& map, const Pose& current,
                             const SessionConfig& config) {
    RelocOutcome out;
    out.event.frame = features.frame_id;
    out.event.kind = RelocKind::continuous;
    out.event.before = current;
    out.event.after = current;
    out.event.fitting_score = std::numeric_limits<double>::infinity();
    out.event.accepted = false;

    const auto submap = extract_submap(map, current.translation, config.submap_radius);
    if (!submap) return out;

    const IcpResult result = icp_register(features, *submap, current, config.continuous_icp);
    out.event.fitting_score = result.fitting_score;
    if (result.converged && result.fitting_score < config.continuous_score_max &&
        within_sanity(current, result.transform, config)) {
        out.event.accepted = true;
        out.event.after = result.transform;
        out.pose = result.transform;
    }
    return out;
}

SessionResult run_session(const std::vector<SessionFrame>& frames, const MapStore& map,
                          const std::vector<std::optional<GpsFix>>& gps,
                          const SessionConfig& config) {
    if (gps.size() != frames.size() && !gps.empty())
        throw std::invalid_argument("run_session: gps stream length must match frames or be empty");

    SessionResult out;
    out.trajectory.reserve(frames.size());

    bool initialized = false;
    std::optional<Eigen::Vector2d> last_fix;
    FeatureSet prev_features;
    Pose prev_pose = Pose::identity();
    Pose prior = Pose::identity();

    for (std::size_t f = 0; f < frames.size(); ++f) {
        PointCloud cropped = crop_to_coverage(frames[f].cloud);
        if (config.filter) {
            const SegmentationResult seg = config.segmenter(cropped, frames[f].movable_boxes);
            cropped = filter_movable(cropped, seg).filtered;
        }
        const FeatureSet features = extract_frame_features(cropped);

        if (f < gps.size() && gps[f] && gps[f]->valid) last_fix = gps[f]->position;

        if (!initialized) {
            const Pose hold = last_fix
                                  ? Pose::from_translation({last_fix->x(), last_fix->y(), 0.0})
                                  : Pose::identity();
            if (last_fix) {
                const auto estimate = initial_pose_estimate(features, map, *last_fix, config);
                RelocEvent event;
                event.frame = frames[f].cloud.frame_id;
                event.kind = RelocKind::initial;
                event.before = hold;
                event.accepted = estimate.has_value();
                event.fitting_score =
                    estimate ? estimate->fitting_score : std::numeric_limits<double>::infinity();
                if (estimate) {
                    const Pose anchored =
                        planar_project(estimate->pose, estimate->pose.translation.z());
                    event.after = anchored;
                    out.events.push_back(event);
                    out.trajectory.push_back(anchored);
                    prev_pose = anchored;
                    prev_features = features;
                    prior = Pose::identity();
                    initialized = true;
                    continue;
                }
                event.after = hold;
                out.events.push_back(event);
            }
            out.trajectory.push_back(hold);
            continue;
        }

        Pose next = odometry_step(prev_features, features, prev_pose, prior, config.odometry_icp);
        if (config.reloc) {
            RelocOutcome outcome = relocalize_step(features, map, next, config);
            out.events.push_back(outcome.event);
            if (outcome.pose) next = planar_project(*outcome.pose, outcome.pose->translation.z());
        }
        prior = pose_compose(prev_pose.inverse(), next);
        prev_pose = next;
        prev_features = features;
        out.trajectory.push_back(next);
    }
    return out;
}

void write_events(const std::string& path, const std::vector<RelocEvent>& events) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open event log for writing: " + path);
    for (const RelocEvent& e : events) {
        std::fprintf(f, "%d %s %d %.17g", e.frame,
                     e.kind == RelocKind::initial ? "initial" : "continuous", e.accepted ? 1 : 0,
                     e.fitting_score);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) std::fprintf(f, " %.17g", e.after.rotation(r, c));
            std::fprintf(f, " %.17g", e.after.translation(r));
        }
        std::fprintf(f, "\n");
    }
    if (std::fclose(f) != 0) throw std::runtime_error("short write to event log: " + path);
}

std::vector<RelocEvent> read_events(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw std::runtime_error("cannot open event log: " + path);
    std::string content;
    char chunk[1 << 16];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof chunk, f)) > 0) content.append(chunk, got);
    std::fclose(f);

    std::vector<RelocEvent> events;
    std::istringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::istringstream in(line);
        RelocEvent e;
        std::string kind;
        int accepted = 0;
        if (!(in >> e.frame >> kind >> accepted >> e.fitting_score))
            throw std::runtime_error("malformed event line: " + line);
        if (kind != "initial" && kind != "continuous")
            throw std::runtime_error("unknown event kind: " + kind);
        e.kind = kind == "initial" ? RelocKind::initial : RelocKind::continuous;
        e.accepted = accepted != 0;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
                if (!(in >> e.after.rotation(r, c)))
                    throw std::runtime_error("malformed event line: " + line);
            if (!(in >> e.after.translation(r)))
                throw std::runtime_error("malformed event line: " + line);
        }
        events.push_back(e);
    }
    return events;
}

} // namespace permaloc
