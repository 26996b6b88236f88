#include "permaloc/icp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace permaloc {

namespace {

// Best rigid motion taking points p onto points q in the least-squares sense,
// via SVD of the cross-covariance.
Pose rigid_fit(const std::vector<Eigen::Vector3d>& p, const std::vector<Eigen::Vector3d>& q) {
    const double n = static_cast<double>(p.size());
    Eigen::Vector3d pc = Eigen::Vector3d::Zero(), qc = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < p.size(); ++i) {
        pc += p[i];
        qc += q[i];
    }
    pc /= n;
    qc /= n;

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < p.size(); ++i) h += (p[i] - pc) * (q[i] - qc).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1;
        r = svd.matrixV() * flip * svd.matrixU().transpose();
    }

    Pose out;
    out.rotation = r;
    out.translation = qc - r * pc;
    return out;
}

// Collinear point sets leave the rotation about their axis unconstrained.
bool degenerate_spread(const std::vector<Eigen::Vector3d>& p) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& v : p) c += v;
    c /= static_cast<double>(p.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& v : p) scatter += (v - c) * (v - c).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    const Eigen::Vector3d ev = eig.eigenvalues(); // ascending
    return ev(1) <= 1e-7 * std::max(ev(2), 1e-12);
}

} // namespace

PointCloud pooled_features(const FeatureSet& features) {
    PointCloud out;
    out.frame_id = features.frame_id;
    out.points.reserve(features.edge.size() + features.planar.size());
    out.points.insert(out.points.end(), features.edge.points.begin(), features.edge.points.end());
    out.points.insert(out.points.end(), features.planar.points.begin(),
                      features.planar.points.end());
    return out;
}

IcpResult icp_register(const FeatureSet& source, const IndexedCloud& target, const Pose& init,
                       const IcpParams& params) {
    if (source.size() == 0) throw std::invalid_argument("icp_register needs a non-empty source");
    if (target.cloud.size() < 10)
        throw std::invalid_argument("icp_register needs at least 10 target points");

    std::vector<Eigen::Vector3d> src;
    src.reserve(source.size());
    for (const Point& p : source.edge.points) src.push_back(p.position());
    for (const Point& p : source.planar.points) src.push_back(p.position());

    const double reject_sq = params.rejection_dist > 0
                                 ? params.rejection_dist * params.rejection_dist
                                 : std::numeric_limits<double>::infinity();

    IcpResult result;
    result.transform = init;
    double last_score = std::numeric_limits<double>::infinity();

    // The reported fitness counts every source point, gate or no gate. The
    // gated means in score_history drive the optimisation, but they can be
    // small when only a sliver of the frame overlaps the target; acceptance
    // thresholds need the number that charges for the unmatched remainder.
    const auto final_fitness = [&](const Pose& pose) {
        double sum = 0.0;
        for (const Eigen::Vector3d& s : src) sum += target.tree.nearest(pose.apply(s)).second;
        return sum / static_cast<double>(src.size());
    };

    std::vector<Eigen::Vector3d> accepted_src, accepted_tgt;
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        accepted_src.clear();
        accepted_tgt.clear();
        for (const Eigen::Vector3d& s : src) {
            const Eigen::Vector3d moved = result.transform.apply(s);
            const auto [idx, d2] = target.tree.nearest(moved);
            if (d2 <= reject_sq) {
                accepted_src.push_back(moved);
                accepted_tgt.push_back(target.cloud.points[idx].position());
            }
        }
        if (accepted_src.size() < 3 || degenerate_spread(accepted_src) ||
            degenerate_spread(accepted_tgt)) {
            result.converged = false;
            result.fitting_score = final_fitness(result.transform);
            return result;
        }

        const Pose delta = rigid_fit(accepted_src, accepted_tgt);
        double score = 0.0;
        for (size_t i = 0; i < accepted_src.size(); ++i)
            score += (delta.apply(accepted_src[i]) - accepted_tgt[i]).squaredNorm();
        score /= static_cast<double>(accepted_src.size());

        // Re-correspondence occasionally proposes a worse fit; keep the
        // previous pose and stop rather than record an increase.
        if (score > last_score) {
            result.converged = true;
            result.fitting_score = final_fitness(result.transform);
            return result;
        }

        result.transform = pose_compose(delta, result.transform);
        result.transform.rotation = orthonormalize(result.transform.rotation);
        result.score_history.push_back(score);
        last_score = score;
        ++result.iterations;

        if (delta.translation.norm() <= params.translation_eps &&
            rotation_angle(delta.rotation) * 180.0 / M_PI <= params.rotation_eps_deg) {
            result.converged = true;
            result.fitting_score = final_fitness(result.transform);
            return result;
        }
    }
    result.fitting_score = final_fitness(result.transform);
    return result;
}

} // namespace permaloc
