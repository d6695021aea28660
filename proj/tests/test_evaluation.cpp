#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "vslam/evaluation.hpp"

using namespace vslam;

namespace {

Trajectory line_traj(double hz, double duration, double offset = 0.0) {
    Trajectory t;
    for (int i = 0; i < int(std::floor(duration * hz + 1e-9)); ++i) {
        const double s = i / hz + offset;
        t.samples.push_back({s, RigidPose(Quat(Eigen::AngleAxisd(0.1 * s, Vec3::UnitY())),
                                          Vec3(std::cos(s), 0.3 * std::sin(2 * s), s))});
    }
    return t;
}

Trajectory transformed(const Trajectory& t, double s, const Mat3& r, const Vec3& x) {
    Trajectory out = t;
    for (auto& p : out.samples) p.pose.translation = s * (r * p.pose.translation) + x;
    return out;
}

// Greedy pairing written the slow way: repeatedly take the globally closest unused pair.
std::size_t greedy_oracle(const Trajectory& est, const Trajectory& gt, double max_dt) {
    std::vector<bool> ue(est.samples.size()), ug(gt.samples.size());
    std::size_t count = 0;
    while (true) {
        double best = INFINITY;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < est.samples.size(); ++i) {
            if (ue[i]) continue;
            for (std::size_t j = 0; j < gt.samples.size(); ++j) {
                if (ug[j]) continue;
                const double d = std::abs(est.samples[i].timestamp - gt.samples[j].timestamp);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (!(best <= max_dt)) return count;
        ue[bi] = ug[bj] = true;
        ++count;
    }
}

}  // namespace

TEST(Associate, IdenticalTimestamps) {
    const auto t = line_traj(30, 2);
    const auto pairs = associate_by_timestamp(t, t, 0.001);
    ASSERT_EQ(pairs.size(), t.samples.size());
    for (const auto& p : pairs) {
        EXPECT_EQ(p.est_index, p.gt_index);
        EXPECT_EQ(p.dt, 0.0);
    }
}

TEST(Associate, HalfWindowOffset) {
    const double max_dt = 0.01;
    const auto gt = line_traj(30, 2);
    const auto est = line_traj(30, 2, max_dt / 2);
    EXPECT_EQ(associate_by_timestamp(est, gt, max_dt).size(), gt.samples.size());
}

TEST(Associate, InterleavedRatesMatchGreedyOracle) {
    const auto gt = line_traj(75, 4);
    const auto est = line_traj(30, 4, 0.0031);
    const auto pairs = associate_by_timestamp(est, gt, 0.010);
    EXPECT_EQ(pairs.size(), greedy_oracle(est, gt, 0.010));
    for (const auto& p : pairs) EXPECT_LE(std::abs(p.dt), 0.010);
}

TEST(Associate, NoOverlap) {
    const auto gt = line_traj(30, 1);
    const auto est = line_traj(30, 1, 100.0);
    try {
        associate_by_timestamp(est, gt, 0.01);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no overlapping samples");
    }
}

TEST(AlignSim3, IdentityForEqualInputs) {
    std::mt19937_64 rng(1);
    const auto pts = test::random_points(rng, 20, Vec3::Zero(), 2.0);
    const Sim3 s = align_sim3(pts, pts);
    EXPECT_NEAR(s.scale, 1.0, 1e-12);
    EXPECT_LE((s.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LE(s.translation.norm(), 1e-12);
}

TEST(AlignSim3, RecoversKnownTransform) {
    std::mt19937_64 rng(2);
    const auto gt = test::random_points(rng, 30, Vec3::Zero(), 2.0);
    const Mat3 r = Eigen::AngleAxisd(1.1, test::random_unit(rng)).toRotationMatrix();
    const Vec3 t(1, 2, 3);
    std::vector<Vec3> est;
    for (const auto& p : gt) est.push_back(2.5 * (r * p) + t);
    const Sim3 s = align_sim3(est, gt);
    EXPECT_NEAR(s.scale, 1.0 / 2.5, 1e-9);
    EXPECT_LE((s.rotation - r.transpose()).norm(), 1e-9);
    EXPECT_LE((s.translation - (-(r.transpose() * t) / 2.5)).norm(), 1e-9);
}

TEST(AlignSim3, Degenerate) {
    EXPECT_THROW(align_sim3({Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0, 0, 0), Vec3(1, 0, 0)}), Error);
    const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2), Vec3(3, 3, 3)};
    EXPECT_THROW(align_sim3(line, line), Error);
}

TEST(AlignSim3, HandlesReflection) {
    std::mt19937_64 rng(3);
    const auto gt = test::random_points(rng, 30, Vec3::Zero(), 2.0);
    std::vector<Vec3> mirrored;
    for (const auto& p : gt) mirrored.emplace_back(-p.x(), p.y(), p.z());
    const Sim3 s = align_sim3(mirrored, gt);
    EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
}

TEST(Ate, ZeroForIdenticalTrajectories) {
    const auto t = line_traj(30, 3);
    const auto r = ate_rmse(t, t, 0.001);
    EXPECT_LE(r.rmse, 1e-12);
    EXPECT_EQ(r.n_matched, t.samples.size());
}

TEST(Ate, InvariantUnderSimilarity) {
    const auto gt = line_traj(30, 3);
    auto est = gt;
    for (std::size_t i = 0; i < est.samples.size(); ++i) est.samples[i].pose.translation += Vec3(0.01 * std::sin(i), 0.02 * std::cos(3.0 * i), 0.0);
    const auto base = ate_rmse(est, gt, 0.001);
    const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const auto moved = ate_rmse(transformed(est, 3.7, r, Vec3(5, -2, 1)), gt, 0.001);
    EXPECT_NEAR(moved.rmse, base.rmse, 1e-9);
}

TEST(Ate, SingleDisplacedSampleBound) {
    const auto gt = line_traj(30, 3);
    auto est = gt;
    const double d = 0.1;
    est.samples[10].pose.translation += Vec3(0, d, 0);
    const auto r = ate_rmse(est, gt, 0.001);
    EXPECT_LE(r.rmse, d / std::sqrt(double(gt.samples.size())) + 1e-12);
    double sq = 0.0;
    for (double e : r.per_sample_errors) sq += e * e;
    EXPECT_NEAR(r.rmse * r.rmse, sq / r.per_sample_errors.size(), 1e-15);
    EXPECT_LE(r.n_matched, std::min(est.samples.size(), gt.samples.size()));
}

TEST(TrajectoryFile, RoundTrip) {
    const auto t = line_traj(75, 2);
    std::stringstream ss;
    ss << "# header comment\n";
    write_trajectory(ss, t);
    const auto back = parse_trajectory(ss);
    ASSERT_EQ(back.samples.size(), t.samples.size());
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        EXPECT_NEAR(back.samples[i].timestamp, t.samples[i].timestamp, 1e-9);
        EXPECT_LE((back.samples[i].pose.translation - t.samples[i].pose.translation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((back.samples[i].pose.rotation.coeffs() - t.samples[i].pose.rotation.coeffs()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(TrajectoryFile, BadLine) {
    std::stringstream ss("0 1 2 3\n");
    EXPECT_THROW(parse_trajectory(ss), ParseError);
}

TEST(Trajectory, InterpolatesPositionAndOrientation) {
    Trajectory t;
    t.samples.push_back({0.0, RigidPose(Quat::Identity(), Vec3(0, 0, 0))});
    t.samples.push_back({1.0, RigidPose(Quat(Eigen::AngleAxisd(1.0, Vec3::UnitY())), Vec3(2, 0, 0))});
    const RigidPose mid = t.interpolate(0.25);
    EXPECT_LE((mid.translation - Vec3(0.5, 0, 0)).norm(), 1e-15);
    EXPECT_NEAR(mid.rotation.angularDistance(Quat::Identity()), 0.25, 1e-12);
    EXPECT_THROW(t.interpolate(2.0), Error);
    t.samples.push_back({0.5, RigidPose{}});
    EXPECT_THROW(t.validate(), Error);
}

TEST(AteCsv, Header) {
    const auto t = line_traj(30, 1);
    std::ostringstream out;
    write_ate_errors_csv(out, ate_rmse(t, t, 0.001));
    EXPECT_EQ(out.str().rfind("timestamp,error\n", 0), 0u);
}
