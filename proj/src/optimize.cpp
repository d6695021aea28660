#include "vslam/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace vslam {

namespace {

constexpr double kMinDepth = 1e-9;

using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat66 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

// Rotation between the renderer camera frame (x right, y up, looking -z) and
// the vision convention (x right, y down, looking +z). It is its own inverse.
const Mat3 kGlToCv = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();

}  // namespace

std::optional<Vec2> project_point(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& intrinsics) {
    const Vec3 pc = pose.rotation.conjugate() * (point - pose.translation);
    const double depth = -pc.z();
    if (!(depth > kMinDepth)) return std::nullopt;
    return Vec2(intrinsics.cx() + intrinsics.fx() * pc.x() / depth, intrinsics.cy() - intrinsics.fy() * pc.y() / depth);
}

ReprojectionTerm reprojection_residual(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& intrinsics,
                                       const Vec2& measured) {
    ReprojectionTerm term;
    const Mat3 rt = pose.rotation_matrix().transpose();
    const Vec3 pc = rt * (point - pose.translation);
    const double d = -pc.z();
    if (!(d > kMinDepth)) return term;

    const double fx = intrinsics.fx();
    const double fy = intrinsics.fy();
    const double inv_d = 1.0 / d;
    term.residual = Vec2(intrinsics.cx() + fx * pc.x() * inv_d, intrinsics.cy() - fy * pc.y() * inv_d) - measured;

    // d(u, v) / d(camera point). The image v axis points down, hence the signs on the second row.
    Mat23 dproj;
    dproj << fx * inv_d, 0.0, fx * pc.x() * inv_d * inv_d, 0.0, -fy * inv_d, -fy * pc.y() * inv_d * inv_d;

    // pose * exp(xi) moves the camera point by [pc]x omega - rho to first order.
    term.d_pose.leftCols<3>() = dproj * skew(pc);
    term.d_pose.rightCols<3>() = -dproj;
    term.d_point = dproj * rt;
    term.valid = true;
    return term;
}

Triangulation triangulate_dlt(const RigidPose& pose1, const RigidPose& pose2, const Vec2& obs1, const Vec2& obs2,
                              const CameraIntrinsics& intrinsics) {
    Triangulation out;
    if ((pose1.translation - pose2.translation).norm() < 1e-12) return out;

    auto projection_rows = [&](const RigidPose& pose) {
        const Mat3 rcw = kGlToCv * pose.rotation_matrix().transpose();
        Eigen::Matrix<double, 3, 4> p;
        p.leftCols<3>() = rcw;
        p.col(3) = -rcw * pose.translation;
        return p;
    };
    const auto p1 = projection_rows(pose1);
    const auto p2 = projection_rows(pose2);
    const double x1 = (obs1.x() - intrinsics.cx()) / intrinsics.fx();
    const double y1 = (obs1.y() - intrinsics.cy()) / intrinsics.fy();
    const double x2 = (obs2.x() - intrinsics.cx()) / intrinsics.fx();
    const double y2 = (obs2.y() - intrinsics.cy()) / intrinsics.fy();

    Eigen::Matrix4d a;
    a.row(0) = x1 * p1.row(2) - p1.row(0);
    a.row(1) = y1 * p1.row(2) - p1.row(1);
    a.row(2) = x2 * p2.row(2) - p2.row(0);
    a.row(3) = y2 * p2.row(2) - p2.row(1);
    for (int r = 0; r < 4; ++r) a.row(r).normalize();

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
    const Vec4 xh = svd.matrixV().col(3);
    if (std::abs(xh.w()) < 1e-12) return out;
    out.point = xh.head<3>() / xh.w();
    if (!out.point.allFinite()) return out;
    out.depth1 = -(pose1.rotation.conjugate() * (out.point - pose1.translation)).z();
    out.depth2 = -(pose2.rotation.conjugate() * (out.point - pose2.translation)).z();
    out.degenerate = false;
    return out;
}

double parallax_deg(const Vec3& point, const RigidPose& pose1, const RigidPose& pose2) {
    const Vec3 r1 = pose1.translation - point;
    const Vec3 r2 = pose2.translation - point;
    const double n = r1.norm() * r2.norm();
    if (n <= 0.0) return 0.0;
    return rad_to_deg(std::atan2(r1.cross(r2).norm(), r1.dot(r2)));
}

void write_lm_trace_csv(std::ostream& out, const LmSolution& sol, bool header) {
    if (header) out << "iter,cost,damping,step_norm\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "0,%.17g,0,0\n", sol.cost_trace.front());
    out << buf;
    for (const auto& it : sol.log) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", it.iter, it.cost, it.damping, it.step_norm);
        out << buf;
    }
}

namespace {

class PoseOnlyProblem {
public:
    using State = RigidPose;

    PoseOnlyProblem(const RigidPose& init, const std::vector<PosePointPair>& pairs, const CameraIntrinsics& intr)
        : pose_(init), pairs_(pairs), intr_(intr), active_(pairs.size()) {
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            active_[i] = project_point(pairs_[i].point, pose_, intr_).has_value();
        }
    }

    double cost() const {
        double c = 0.0;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            if (!active_[i]) continue;
            auto uv = project_point(pairs_[i].point, pose_, intr_);
            if (!uv) return std::numeric_limits<double>::infinity();
            c += 0.5 * (*uv - pairs_[i].measurement).squaredNorm();
        }
        return c;
    }

    double linearize() {
        h_.setZero();
        g_.setZero();
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            if (!active_[i]) continue;
            const auto t = reprojection_residual(pairs_[i].point, pose_, intr_, pairs_[i].measurement);
            if (!t.valid) continue;
            h_.noalias() += t.d_pose.transpose() * t.d_pose;
            g_.noalias() += t.d_pose.transpose() * t.residual;
        }
        return g_.cwiseAbs().maxCoeff();
    }

    std::optional<Eigen::VectorXd> solve_step(double damping) const {
        Eigen::LDLT<Mat66> ldlt(h_ + damping * Mat66::Identity());
        if (ldlt.info() != Eigen::Success) return std::nullopt;
        Eigen::VectorXd dx = ldlt.solve(-g_);
        return dx;
    }

    State save() const { return pose_; }
    void restore(State s) { pose_ = s; }
    void retract(const Eigen::VectorXd& dx) { pose_ = vslam::retract(pose_, Vec6(dx)); }

    const RigidPose& pose() const { return pose_; }

private:
    RigidPose pose_;
    const std::vector<PosePointPair>& pairs_;
    const CameraIntrinsics& intr_;
    std::vector<bool> active_;
    Mat66 h_ = Mat66::Zero();
    Vec6 g_ = Vec6::Zero();
};

struct BundleFactor {
    bool pose_fixed = false;
    std::size_t pose = 0;   // index into free or fixed poses
    std::size_t point = 0;  // index into points
    Vec2 measurement = Vec2::Zero();
    double weight = 1.0;
};

// Free poses and free points, with the point blocks eliminated by Schur complement.
class BundleProblem {
public:
    struct State {
        std::vector<RigidPose> poses;
        std::vector<Vec3> points;
    };

    BundleProblem(std::vector<RigidPose> free_poses, std::vector<RigidPose> fixed_poses, std::vector<Vec3> points,
                  std::vector<BundleFactor> factors, const CameraIntrinsics& intr)
        : state_{std::move(free_poses), std::move(points)},
          fixed_(std::move(fixed_poses)),
          intr_(intr) {
        // Factors starting behind a camera are dropped for the whole solve.
        for (auto& f : factors) {
            if (project_point(state_.points[f.point], pose_of(f), intr_)) factors_.push_back(f);
        }
        point_factors_.resize(state_.points.size());
        for (std::size_t k = 0; k < factors_.size(); ++k) point_factors_[factors_[k].point].push_back(k);
    }

    std::size_t factor_count() const { return factors_.size(); }

    double cost() const {
        double c = 0.0;
        for (const auto& f : factors_) {
            auto uv = project_point(state_.points[f.point], pose_of(f), intr_);
            if (!uv) return std::numeric_limits<double>::infinity();
            c += 0.5 * f.weight * (*uv - f.measurement).squaredNorm();
        }
        return c;
    }

    double rms_px() const {
        if (factors_.empty()) return 0.0;
        double s = 0.0;
        for (const auto& f : factors_) {
            auto uv = project_point(state_.points[f.point], pose_of(f), intr_);
            if (uv) s += (*uv - f.measurement).squaredNorm();
        }
        return std::sqrt(s / static_cast<double>(factors_.size()));
    }

    double linearize() {
        const std::size_t m = state_.poses.size();
        const std::size_t n = state_.points.size();
        hpp_.assign(m, Mat66::Zero());
        hll_.assign(n, Mat3::Zero());
        gp_.assign(m, Vec6::Zero());
        gl_.assign(n, Vec3::Zero());
        w_.assign(factors_.size(), Mat63::Zero());
        double gmax = 0.0;
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            const auto& f = factors_[k];
            const auto t = reprojection_residual(state_.points[f.point], pose_of(f), intr_, f.measurement);
            if (!t.valid) continue;
            const Mat23 jl = std::sqrt(f.weight) * t.d_point;
            const Vec2 r = std::sqrt(f.weight) * t.residual;
            hll_[f.point].noalias() += jl.transpose() * jl;
            gl_[f.point].noalias() += jl.transpose() * r;
            if (!f.pose_fixed) {
                const Mat26 jp = std::sqrt(f.weight) * t.d_pose;
                hpp_[f.pose].noalias() += jp.transpose() * jp;
                gp_[f.pose].noalias() += jp.transpose() * r;
                w_[k].noalias() = jp.transpose() * jl;
            }
        }
        for (const auto& g : gp_) gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
        for (const auto& g : gl_) gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
        return gmax;
    }

    std::optional<Eigen::VectorXd> solve_step(double damping) const {
        const std::size_t m = state_.poses.size();
        const std::size_t n = state_.points.size();
        std::vector<Mat3> c_inv(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Mat3 c = hll_[j] + damping * Mat3::Identity();
            Eigen::LLT<Mat3> llt(c);
            if (llt.info() != Eigen::Success) return std::nullopt;
            c_inv[j] = llt.solve(Mat3::Identity());
        }

        Eigen::VectorXd dp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * m));
        if (m > 0) {
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6 * m, 6 * m);
            Eigen::VectorXd rhs(6 * m);
            for (std::size_t i = 0; i < m; ++i) {
                s.block<6, 6>(6 * i, 6 * i) = hpp_[i] + damping * Mat66::Identity();
                rhs.segment<6>(6 * i) = -gp_[i];
            }
            for (std::size_t j = 0; j < n; ++j) {
                const auto& fs = point_factors_[j];
                for (std::size_t a : fs) {
                    const auto& fa = factors_[a];
                    if (fa.pose_fixed) continue;
                    const Mat63 wc = w_[a] * c_inv[j];
                    rhs.segment<6>(6 * fa.pose).noalias() += wc * gl_[j];
                    for (std::size_t b : fs) {
                        const auto& fb = factors_[b];
                        if (fb.pose_fixed) continue;
                        s.block<6, 6>(6 * fa.pose, 6 * fb.pose).noalias() -= wc * w_[b].transpose();
                    }
                }
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
            if (ldlt.info() != Eigen::Success) return std::nullopt;
            dp = ldlt.solve(rhs);
        }

        Eigen::VectorXd dx(static_cast<Eigen::Index>(6 * m + 3 * n));
        dx.head(static_cast<Eigen::Index>(6 * m)) = dp;
        for (std::size_t j = 0; j < n; ++j) {
            Vec3 b = -gl_[j];
            for (std::size_t a : point_factors_[j]) {
                const auto& fa = factors_[a];
                if (!fa.pose_fixed) b.noalias() -= w_[a].transpose() * dp.segment<6>(6 * fa.pose);
            }
            dx.segment<3>(static_cast<Eigen::Index>(6 * m + 3 * j)) = c_inv[j] * b;
        }
        return dx;
    }

    State save() const { return state_; }
    void restore(State s) { state_ = std::move(s); }
    void retract(const Eigen::VectorXd& dx) {
        const std::size_t m = state_.poses.size();
        for (std::size_t i = 0; i < m; ++i) state_.poses[i] = vslam::retract(state_.poses[i], Vec6(dx.segment<6>(6 * i)));
        for (std::size_t j = 0; j < state_.points.size(); ++j) state_.points[j] += dx.segment<3>(6 * m + 3 * j);
    }

    const State& state() const { return state_; }

private:
    const RigidPose& pose_of(const BundleFactor& f) const { return f.pose_fixed ? fixed_[f.pose] : state_.poses[f.pose]; }

    State state_;
    std::vector<RigidPose> fixed_;
    std::vector<BundleFactor> factors_;
    std::vector<std::vector<std::size_t>> point_factors_;
    const CameraIntrinsics& intr_;

    std::vector<Mat66> hpp_;
    std::vector<Mat3> hll_;
    std::vector<Vec6> gp_;
    std::vector<Vec3> gl_;
    std::vector<Mat63> w_;
};

}  // namespace

MotionOnlyResult motion_only_ba(const RigidPose& pose_init, const std::vector<PosePointPair>& pairs,
                                const CameraIntrinsics& intrinsics, const LmSettings& settings) {
    if (pairs.size() < 4) throw std::invalid_argument("motion-only BA needs at least 4 pairs");
    PoseOnlyProblem problem(pose_init, pairs, intrinsics);
    MotionOnlyResult out;
    out.solution = solve_lm(problem, settings);
    if (out.solution.status == LmStatus::stalled) throw Error("motion-only BA stalled");
    out.pose = problem.pose();
    return out;
}

std::string to_string(BaStatus status) {
    switch (status) {
        case BaStatus::optimized: return "optimized";
        case BaStatus::insufficient_free_variables: return "insufficient free variables";
        case BaStatus::no_factors: return "no factors";
        case BaStatus::stalled: return "stalled";
    }
    return "unknown";
}

std::vector<KeyFrameId> last_keyframes(const SlamMap& map, std::size_t k) {
    std::vector<KeyFrameId> out;
    for (auto it = map.keyframes().rbegin(); it != map.keyframes().rend() && out.size() < k; ++it) {
        out.push_back(it->first);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

WindowedBaResult solve_window(const SlamMap& map, const std::vector<KeyFrameId>& window_in,
                              const CameraIntrinsics& intrinsics, const LmSettings& settings) {
    WindowedBaResult result;
    auto& rep = result.report;
    std::vector<KeyFrameId> window = window_in;
    std::sort(window.begin(), window.end());
    window.erase(std::unique(window.begin(), window.end()), window.end());
    for (auto id : window) {
        if (!map.keyframe(id)) throw Error("window keyframe " + std::to_string(id) + " not in map");
    }
    if (window.size() <= 2) {
        rep.status = BaStatus::insufficient_free_variables;
        rep.message = "insufficient free variables: the two anchored keyframes consume the window";
        return result;
    }

    std::map<KeyFrameId, std::size_t> free_index;
    std::vector<KeyFrameId> free_ids(window.begin() + 2, window.end());
    std::vector<RigidPose> free_poses;
    for (auto id : free_ids) {
        free_index[id] = free_poses.size();
        free_poses.push_back(map.keyframe(id)->pose);
    }

    std::set<VertexId> point_set;
    for (auto id : window) {
        for (auto pid : map.points_observed_by(id)) point_set.insert(pid);
    }
    std::vector<VertexId> point_ids(point_set.begin(), point_set.end());
    std::vector<Vec3> points;
    points.reserve(point_ids.size());
    for (auto pid : point_ids) points.push_back(map.point(pid)->position);

    std::map<KeyFrameId, std::size_t> fixed_index;
    std::vector<RigidPose> fixed_poses;
    std::vector<BundleFactor> factors;
    for (std::size_t j = 0; j < point_ids.size(); ++j) {
        for (const auto& [kf, uv] : map.observations(point_ids[j])) {
            BundleFactor f;
            f.point = j;
            f.measurement = uv;
            if (auto it = free_index.find(kf); it != free_index.end()) {
                f.pose = it->second;
            } else {
                f.pose_fixed = true;
                auto [fit, inserted] = fixed_index.try_emplace(kf, fixed_poses.size());
                if (inserted) fixed_poses.push_back(map.keyframe(kf)->pose);
                f.pose = fit->second;
            }
            factors.push_back(f);
        }
    }

    rep.free_poses = free_poses.size();
    rep.fixed_poses = fixed_poses.size();
    rep.points = points.size();
    BundleProblem problem(std::move(free_poses), std::move(fixed_poses), std::move(points), std::move(factors),
                          intrinsics);
    rep.factors = problem.factor_count();
    if (rep.factors == 0) {
        rep.status = BaStatus::no_factors;
        rep.message = "no valid reprojection factors in window";
        return result;
    }
    rep.initial_rms_px = problem.rms_px();
    rep.solution = solve_lm(problem, settings);
    rep.iterations = rep.solution.iterations;
    if (rep.solution.status == LmStatus::stalled) {
        rep.status = BaStatus::stalled;
        rep.message = "solver stalled; map left unmodified";
        rep.final_rms_px = rep.initial_rms_px;
        return result;
    }
    rep.status = BaStatus::optimized;
    rep.final_rms_px = problem.rms_px();
    const auto& st = problem.state();
    for (std::size_t i = 0; i < free_ids.size(); ++i) result.poses[free_ids[i]] = st.poses[i];
    for (std::size_t j = 0; j < point_ids.size(); ++j) result.points[point_ids[j]] = st.points[j];
    return result;
}

WindowedBaReport windowed_ba(SlamMap& map, const std::vector<KeyFrameId>& window, const CameraIntrinsics& intrinsics,
                             const LmSettings& settings) {
    auto result = solve_window(map, window, intrinsics, settings);
    if (result.report.status == BaStatus::optimized) map.apply_update(result.poses, result.points);
    return std::move(result.report);
}

}  // namespace vslam
