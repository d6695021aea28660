#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vslam/lm.hpp"
#include "vslam/optimize.hpp"
#include "vslam/se3.hpp"

using namespace vslam;

namespace {

CameraIntrinsics square1000() {
    CameraIntrinsics k;
    k.width_px = k.height_px = 1000;
    return k;
}

// Linear residuals r = A x - b.
struct LinearProblem {
    using State = Eigen::VectorXd;
    Eigen::MatrixXd a;
    Eigen::VectorXd b, x;
    Eigen::MatrixXd h;
    Eigen::VectorXd g;

    double cost() const { return 0.5 * (a * x - b).squaredNorm(); }
    double linearize() {
        h = a.transpose() * a;
        g = a.transpose() * (a * x - b);
        return g.cwiseAbs().maxCoeff();
    }
    std::optional<Eigen::VectorXd> solve_step(double damping) {
        Eigen::MatrixXd m = h;
        m.diagonal().array() += damping;
        return Eigen::VectorXd(m.ldlt().solve(-g));
    }
    State save() const { return x; }
    void restore(const State& s) { x = s; }
    void retract(const Eigen::VectorXd& dx) { x += dx; }
};

// Never yields a usable step.
struct BrokenProblem {
    using State = double;
    double v = 1.0;
    double cost() const { return v * v; }
    double linearize() { return 1.0; }
    std::optional<Eigen::VectorXd> solve_step(double) { return std::nullopt; }
    State save() const { return v; }
    void restore(State s) { v = s; }
    void retract(const Eigen::VectorXd&) {}
};

void expect_monotone(const LmSolution& s) {
    for (std::size_t i = 1; i < s.cost_trace.size(); ++i) ASSERT_LE(s.cost_trace[i], s.cost_trace[i - 1]);
}

// Worst entry-wise deviation, relative to the largest magnitude entry of the reference.
template <class A, class B>
double rel_dev(const A& analytic, const B& numeric) {
    const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

struct BaFixture {
    CameraIntrinsics k = square1000();
    test::MapFixture fx;
};

BaFixture five_keyframes(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BaFixture f;
    std::vector<RigidPose> poses;
    for (int i = 0; i < 5; ++i) {
        const double a = 0.3 * i;
        poses.push_back(test::look_at(Vec3(3 * std::sin(a), 0.2 * i, 3 * std::cos(a)), Vec3::Zero()));
    }
    f.fx = test::make_map_fixture(poses, test::random_points(rng, 50, Vec3::Zero(), 1.0), f.k);
    return f;
}

}  // namespace

TEST(Reprojection, ExactMeasurementGivesZeroResidual) {
    const auto k = square1000();
    const RigidPose pose = test::look_at(Vec3(1, 0.5, 3), Vec3::Zero());
    const Vec3 p(0.1, -0.2, 0.3);
    Vec2 uv;
    ASSERT_TRUE(test::pinhole_uv(p, pose, k, uv));
    const auto t = reprojection_residual(p, pose, k, uv);
    ASSERT_TRUE(t.valid);
    EXPECT_LE(t.residual.norm(), 1e-10);
}

TEST(Reprojection, LateralShiftScalesWithFocalOverDepth) {
    const auto k = square1000();
    const RigidPose pose;
    const double z = 2.0, delta = 1e-6;
    const auto a = project_point(Vec3(0, 0, -z), pose, k);
    const auto b = project_point(Vec3(delta, 0, -z), pose, k);
    ASSERT_TRUE(a && b);
    EXPECT_NEAR((*b - *a).x(), delta / z * 500.0, 1e-9);
}

TEST(Reprojection, BehindCameraIsInvalid) {
    const auto t = reprojection_residual(Vec3(0, 0, 1), RigidPose{}, square1000(), Vec2(500, 500));
    EXPECT_FALSE(t.valid);
    EXPECT_FALSE(project_point(Vec3(0, 0, 0), RigidPose{}, square1000()));
}

TEST(Reprojection, JacobiansMatchCentralDifferences) {
    std::mt19937_64 rng(2024);
    const double eps = 1e-6;
    double worst = 0.0;
    int done = 0;
    while (done < 500) {
        CameraIntrinsics k;
        k.fov_y_deg = test::uniform(rng, 30, 120);
        k.width_px = int(test::uniform(rng, 100, 2000));
        k.height_px = int(test::uniform(rng, 100, 2000));
        const RigidPose pose = test::random_pose(rng, 3.0, 3.0);
        const Vec3 pc(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), -test::uniform(rng, 0.5, 10));
        const Vec3 p = pose * pc;
        const Vec2 meas(test::uniform(rng, 0, k.width_px), test::uniform(rng, 0, k.height_px));
        const auto t = reprojection_residual(p, pose, k, meas);
        if (!t.valid) continue;
        Eigen::Matrix<double, 2, 6> fd_pose;
        for (int i = 0; i < 6; ++i) {
            Vec6 d = Vec6::Zero();
            d[i] = eps;
            const auto hi = *project_point(p, retract(pose, d), k);
            const auto lo = *project_point(p, retract(pose, -d), k);
            fd_pose.col(i) = (hi - lo) / (2 * eps);
        }
        Eigen::Matrix<double, 2, 3> fd_point;
        for (int i = 0; i < 3; ++i) {
            Vec3 d = Vec3::Zero();
            d[i] = eps;
            fd_point.col(i) = (*project_point(p + d, pose, k) - *project_point(p - d, pose, k)) / (2 * eps);
        }
        worst = std::max({worst, rel_dev(t.d_pose, fd_pose), rel_dev(t.d_point, fd_point)});
        ++done;
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Triangulate, SymmetricPair) {
    const auto k = square1000();
    const RigidPose a(Quat::Identity(), Vec3(-0.5, 0, 3));
    const RigidPose b(Quat::Identity(), Vec3(0.5, 0, 3));
    Vec2 ua, ub;
    ASSERT_TRUE(test::pinhole_uv(Vec3::Zero(), a, k, ua));
    ASSERT_TRUE(test::pinhole_uv(Vec3::Zero(), b, k, ub));
    const auto t = triangulate_dlt(a, b, ua, ub, k);
    ASSERT_FALSE(t.degenerate);
    EXPECT_LE(t.point.norm(), 1e-9);
    EXPECT_NEAR(t.depth1, 3.0, 1e-9);
    EXPECT_NEAR(t.depth2, 3.0, 1e-9);
}

TEST(Triangulate, SamePoseIsDegenerate) {
    const auto k = square1000();
    const RigidPose a(Quat::Identity(), Vec3(0, 0, 3));
    EXPECT_TRUE(triangulate_dlt(a, a, Vec2(500, 500), Vec2(500, 500), k).degenerate);
}

TEST(Triangulate, BehindCameraReportsNegativeDepth) {
    const auto k = square1000();
    const RigidPose a(Quat::Identity(), Vec3(-0.5, 0, 3));
    const RigidPose b(Quat::Identity(), Vec3(0.5, 0, 3));
    // rays that converge behind both cameras
    Vec2 ua, ub;
    ASSERT_TRUE(test::pinhole_uv(Vec3(0, 0, 0), a, k, ua));
    ASSERT_TRUE(test::pinhole_uv(Vec3(0, 0, 0), b, k, ub));
    const auto t = triangulate_dlt(a, b, ub, ua, k);
    ASSERT_FALSE(t.degenerate);
    EXPECT_LT(t.depth1, 0.0);
    EXPECT_LT(t.depth2, 0.0);
}

TEST(Triangulate, NoisyObservationsStayWithinBound) {
    const auto k = square1000();
    const RigidPose a(Quat::Identity(), Vec3(-0.5, 0, 3));
    const RigidPose b(Quat::Identity(), Vec3(0.5, 0, 3));
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.5);
    // depth error of a rectified pair: z^2 * sqrt(2) sigma / (f b), f = 500 px, b = 1
    auto bound = [](double z) { return 5.0 * z * z * std::sqrt(2.0) * 0.5 / 500.0; };
    double sq = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        const Vec3 p(test::uniform(rng, -0.5, 0.5), test::uniform(rng, -0.5, 0.5), test::uniform(rng, -0.5, 0.5));
        Vec2 ua, ub;
        ASSERT_TRUE(test::pinhole_uv(p, a, k, ua));
        ASSERT_TRUE(test::pinhole_uv(p, b, k, ub));
        ua += Vec2(noise(rng), noise(rng));
        ub += Vec2(noise(rng), noise(rng));
        const auto t = triangulate_dlt(a, b, ua, ub, k);
        ASSERT_FALSE(t.degenerate);
        const double e = (t.point - p).norm();
        EXPECT_LT(e, bound(3.0 - p.z()));
        sq += e * e;
    }
    // depth uniform on [2.5, 3.5]: sqrt(E[z^4]) sqrt(2) sigma / (f b) = 0.01308
    const double expected = std::sqrt((std::pow(3.5, 5) - std::pow(2.5, 5)) / 5.0) * std::sqrt(2.0) * 0.5 / 500.0;
    EXPECT_NEAR(std::sqrt(sq / n), expected, 0.1 * expected);
    EXPECT_NEAR(std::sqrt(sq / n), 0.012891, 1e-6);  // seed 99
}

TEST(Parallax, RightAngle) {
    const RigidPose a(Quat::Identity(), Vec3(1, 0, 0));
    const RigidPose b(Quat::Identity(), Vec3(0, 1, 0));
    EXPECT_NEAR(parallax_deg(Vec3::Zero(), a, b), 90.0, 1e-12);
}

TEST(SolveLm, AtOptimumConvergesImmediately) {
    LinearProblem p;
    p.a = Eigen::MatrixXd::Identity(3, 3);
    p.b = Eigen::VectorXd::Ones(3);
    p.x = p.b;
    const auto s = solve_lm(p, LmSettings{});
    EXPECT_TRUE(s.converged);
    EXPECT_LE(s.iterations, 1);
    EXPECT_EQ(s.final_cost(), 0.0);
    for (const auto& it : s.log) EXPECT_EQ(it.step_norm, 0.0);
}

TEST(SolveLm, LinearResidualsSolvedInOneAcceptedStep) {
    std::mt19937_64 rng(4);
    LinearProblem p;
    p.a = Eigen::MatrixXd(6, 3);
    p.b = Eigen::VectorXd(6);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 3; ++j) p.a(i, j) = test::uniform(rng, -1, 1);
        p.b[i] = test::uniform(rng, -1, 1);
    }
    p.x = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd optimum = p.a.colPivHouseholderQr().solve(p.b);
    LmSettings s;
    s.initial_damping = 1e-14;  // Gauss-Newton limit
    const auto sol = solve_lm(p, s);
    ASSERT_GE(sol.log.size(), 1u);
    EXPECT_TRUE(sol.converged);
    // the first accepted step already lands on the optimum
    LinearProblem q = p;
    q.x = Eigen::VectorXd::Zero(3);
    q.linearize();
    q.retract(*q.solve_step(sol.log.front().damping));
    EXPECT_LE((q.x - optimum).norm(), 1e-9);
    EXPECT_LE((p.x - optimum).norm(), 1e-9);
    expect_monotone(sol);
}

TEST(SolveLm, StallsWhenNoStepIsUsable) {
    BrokenProblem p;
    const auto s = solve_lm(p, LmSettings{});
    EXPECT_EQ(s.status, LmStatus::stalled);
    EXPECT_FALSE(s.converged);
}

TEST(SolveLm, NonFiniteInitialCostThrows) {
    BrokenProblem p;
    p.v = INFINITY;
    EXPECT_THROW(solve_lm(p, LmSettings{}), Error);
}

TEST(SolveLm, InvalidSettingsThrow) {
    LmSettings s;
    s.damping_up = 0.0;
    EXPECT_THROW(s.validate(), Error);
}

TEST(MotionOnlyBa, GroundTruthStaysPut) {
    std::mt19937_64 rng(10);
    const auto k = square1000();
    const RigidPose gt = test::look_at(Vec3(0.5, 0.2, 3), Vec3::Zero());
    std::vector<PosePointPair> pairs;
    for (const auto& p : test::random_points(rng, 100, Vec3::Zero(), 1.0)) {
        Vec2 uv;
        ASSERT_TRUE(test::pinhole_uv(p, gt, k, uv));
        pairs.push_back({p, uv});
    }
    const auto r = motion_only_ba(gt, pairs, k, LmSettings{});
    EXPECT_LE((r.pose.translation - gt.translation).norm(), 1e-10);
    EXPECT_LE(r.pose.rotation.angularDistance(gt.rotation), 1e-10);
}

TEST(MotionOnlyBa, RecoversPerturbedPose) {
    std::mt19937_64 rng(11);
    const auto k = square1000();
    const RigidPose gt = test::look_at(Vec3(-0.5, 0.4, 3), Vec3::Zero());
    std::vector<PosePointPair> pairs;
    for (const auto& p : test::random_points(rng, 100, Vec3::Zero(), 1.0)) {
        Vec2 uv;
        ASSERT_TRUE(test::pinhole_uv(p, gt, k, uv));
        pairs.push_back({p, uv});
    }
    Vec6 d;
    d.head<3>() = test::random_unit(rng) * 0.05;
    d.tail<3>() = test::random_unit(rng) * 0.05;
    const auto r = motion_only_ba(retract(gt, d), pairs, k, LmSettings{});
    EXPECT_LE((r.pose.translation - gt.translation).norm(), 1e-7);
    EXPECT_LE(r.pose.rotation.angularDistance(gt.rotation), 1e-7);
    expect_monotone(r.solution);
}

TEST(MotionOnlyBa, ThreePairsRejected) {
    std::vector<PosePointPair> pairs(3, {Vec3(0, 0, -1), Vec2(500, 500)});
    EXPECT_THROW(motion_only_ba(RigidPose{}, pairs, square1000(), LmSettings{}), std::invalid_argument);
}

TEST(WindowedBa, PerturbedPosesReturnToZeroError) {
    auto f = five_keyframes(21);
    auto& map = f.fx.map;
    std::mt19937_64 rng(22);
    std::map<KeyFrameId, RigidPose> moved;
    for (const auto& [id, kf] : map.keyframes()) {
        if (id < 2) continue;
        Vec6 d;
        d.head<3>() = test::random_unit(rng) * 0.01;
        d.tail<3>() = test::random_unit(rng) * 0.01;
        moved[id] = retract(kf.pose, d);
    }
    map.apply_update(moved, {});
    ASSERT_GT(test::rms_reprojection(map, f.k), 1.0);
    const RigidPose anchor0 = map.keyframe(0)->pose;
    const RigidPose anchor1 = map.keyframe(1)->pose;
    const auto before = map.version();
    const auto rep = windowed_ba(map, last_keyframes(map, 5), f.k, LmSettings{});
    ASSERT_EQ(rep.status, BaStatus::optimized) << rep.message;
    EXPECT_EQ(map.version(), before + 1);
    EXPECT_LT(test::rms_reprojection(map, f.k), 1e-8);
    EXPECT_LT(rep.final_rms_px, 1e-8);
    expect_monotone(rep.solution);
    // anchors bit-identical
    EXPECT_EQ(map.keyframe(0)->pose.translation, anchor0.translation);
    EXPECT_EQ(map.keyframe(0)->pose.rotation.coeffs(), anchor0.rotation.coeffs());
    EXPECT_EQ(map.keyframe(1)->pose.translation, anchor1.translation);
    EXPECT_EQ(map.keyframe(1)->pose.rotation.coeffs(), anchor1.rotation.coeffs());
}

TEST(WindowedBa, PerturbedPointsReturnToGroundTruth) {
    auto f = five_keyframes(31);
    auto& map = f.fx.map;
    std::mt19937_64 rng(32);
    std::map<VertexId, Vec3> moved;
    for (const auto& [id, p] : map.points()) moved[id] = p.position + test::random_unit(rng) * 1e-3;
    map.apply_update({}, moved);
    const auto rep = windowed_ba(map, last_keyframes(map, 5), f.k, LmSettings{});
    ASSERT_EQ(rep.status, BaStatus::optimized);
    EXPECT_LT(test::rms_reprojection(map, f.k), 1e-8);
    for (const auto& [id, p] : map.points()) EXPECT_LE((p.position - f.fx.points[id]).norm(), 1e-6);
}

TEST(WindowedBa, NoiseFreeMapIsANoOp) {
    auto f = five_keyframes(41);
    auto& map = f.fx.map;
    const auto rep = windowed_ba(map, last_keyframes(map, 5), f.k, LmSettings{});
    EXPECT_LT(test::rms_reprojection(map, f.k), 1e-9);
    for (const auto& [id, kf] : map.keyframes()) EXPECT_LE((kf.pose.translation - f.fx.poses[id].translation).norm(), 1e-9);
    EXPECT_NE(rep.status, BaStatus::stalled);
}

TEST(WindowedBa, SingleKeyframeWindowHasNoFreeVariables) {
    auto f = five_keyframes(51);
    auto& map = f.fx.map;
    const auto before = map.version();
    const auto rep = windowed_ba(map, last_keyframes(map, 1), f.k, LmSettings{});
    EXPECT_EQ(rep.status, BaStatus::insufficient_free_variables);
    EXPECT_EQ(to_string(rep.status), "insufficient free variables");
    EXPECT_EQ(map.version(), before);
}

TEST(WindowedBa, KeyframesOutsideWindowStayFixed) {
    auto f = five_keyframes(61);
    auto& map = f.fx.map;
    std::mt19937_64 rng(62);
    std::map<VertexId, Vec3> moved;
    for (const auto& [id, p] : map.points()) moved[id] = p.position + test::random_unit(rng) * 1e-3;
    map.apply_update({}, moved);
    const RigidPose outside = map.keyframe(0)->pose;
    const auto window = last_keyframes(map, 3);
    ASSERT_EQ(window.front(), 2u);
    const auto rep = windowed_ba(map, window, f.k, LmSettings{});
    ASSERT_EQ(rep.status, BaStatus::optimized);
    EXPECT_EQ(map.keyframe(0)->pose.translation, outside.translation);
    EXPECT_GT(rep.fixed_poses, 2u);
    EXPECT_LT(test::rms_reprojection(map, f.k), 1e-8);
}

TEST(WindowedBa, DeterministicTraces) {
    auto a = five_keyframes(71);
    auto b = five_keyframes(71);
    std::map<VertexId, Vec3> moved;
    for (const auto& [id, p] : a.fx.map.points()) moved[id] = p.position + Vec3(1e-3, -1e-3, 5e-4);
    a.fx.map.apply_update({}, moved);
    b.fx.map.apply_update({}, moved);
    const auto ra = solve_window(a.fx.map, last_keyframes(a.fx.map, 5), a.k, LmSettings{});
    const auto rb = solve_window(b.fx.map, last_keyframes(b.fx.map, 5), b.k, LmSettings{});
    EXPECT_EQ(ra.report.solution.cost_trace, rb.report.solution.cost_trace);
}

TEST(LmTrace, CsvHeader) {
    LmSolution s;
    s.cost_trace = {2.0, 1.0};
    s.log.push_back({1, 1.0, 1e-5, 0.25});
    std::ostringstream out;
    write_lm_trace_csv(out, s);
    EXPECT_EQ(out.str().rfind("iter,cost,damping,step_norm\n", 0), 0u);
    EXPECT_NE(out.str().find("\n1,"), std::string::npos);
}
