// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"
#include "vslam/association.hpp"
#include "vslam/harness/benchmark.hpp"
#include "vslam/harness/offline_runner.hpp"
#include "vslam/harness/trajectory_gen.hpp"
#include "vslam/optimize.hpp"
#include "vslam/se3.hpp"
#include "vslam/system.hpp"

using namespace vslam;
using namespace vslam::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

#define REQUIRE(cond, msg)                      \
    do {                                        \
        if (!(cond)) return Outcome{false, msg}; \
    } while (0)

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

CameraIntrinsics square(double fov, int px) {
    CameraIntrinsics k;
    k.fov_y_deg = fov;
    k.width_px = k.height_px = px;
    return k;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome projection_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const Mat4 id = Mat4::Identity();
    double worst = 0.0;
    {
        const auto k = square(90, 1000);
        const Mat4 p = perspective_matrix(k);
        REQUIRE(std::abs(p(0, 0) - 1.0) < 1e-15 && std::abs(p(1, 1) - 1.0) < 1e-15, "fov 90 focal");
        const auto a = project_vertex(Vec3(0, 0, -1), id, id, p, k, {}, 0);
        const auto b = project_vertex(Vec3(0.5, 0.5, -1), id, id, p, k, {}, 0);
        REQUIRE(a && b, "example vertex culled");
        worst = std::max({worst, std::abs(a->first.u - 500), std::abs(a->first.v - 500), std::abs(b->first.u - 750),
                          std::abs(b->first.v - 250)});
        REQUIRE(!project_vertex(Vec3(0, 0, 1), id, id, p, k, {}, 0), "behind camera kept");
        REQUIRE(std::abs(perspective_matrix(square(60, 1000))(1, 1) - std::sqrt(3.0)) < 1e-14, "fov 60 focal");
    }
    std::mt19937_64 rng(42);
    SceneSpec spec;
    spec.kind = SceneKind::seeded_point_cloud;
    spec.count = 2000;
    spec.extent = 4.0;
    const auto mesh = generate_scene(spec);
    std::size_t compared = 0;
    for (int trial = 0; trial < 20; ++trial) {
        CameraIntrinsics k;
        k.fov_y_deg = test::uniform(rng, 40, 120);
        k.width_px = int(test::uniform(rng, 200, 2000));
        k.height_px = int(test::uniform(rng, 200, 2000));
        const RigidPose pose = test::random_pose(rng, 3.0, 0.5);
        const auto f = capture_frame(mesh, pose, k, {}, 0, 0);
        for (const auto& x : f.features) {
            Vec2 uv;
            REQUIRE(test::pinhole_uv(mesh.vertices()[x.id], pose, k, uv), "feature behind camera");
            worst = std::max({worst, std::abs(x.u - uv.x()), std::abs(x.v - uv.y())});
            const Vec3 back = back_project(x.u, x.v, x.depth, id, pose, k);
            const Vec3& truth = mesh.vertices()[x.id];
            REQUIRE((back - truth).norm() <= 1e-9 * std::max(1.0, truth.norm()), "back-projection round trip");
            ++compared;
        }
    }
    const double secs = elapsed_s(t0);
    REQUIRE(worst < 1e-9, fmt("max pixel deviation %.3g", worst));
    REQUIRE(secs < 1.0, fmt("took %.2f s", secs));
    return {true, fmt("%.0f features, max deviation %.2g px, %.3f s", double(compared), worst, secs)};
}

FeatureFrame random_frame(std::mt19937_64& rng, std::size_t max_n, VertexId universe) {
    std::uniform_int_distribution<std::size_t> count(0, max_n);
    std::uniform_int_distribution<VertexId> pick(0, universe - 1);
    std::vector<VertexId> ids;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(pick(rng));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    FeatureFrame f;
    for (auto id : ids) f.features.push_back({test::uniform(rng, 0, 640), test::uniform(rng, 0, 480), id, 1.0});
    return f;
}

Outcome matching_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1000);
    std::size_t discrepancies = 0, total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_frame(rng, 1000, 2500);
        const auto b = random_frame(rng, 1000, 2500);
        std::vector<MatchPair> oracle;
        for (std::size_t i = 0; i < a.features.size(); ++i)
            for (std::size_t j = 0; j < b.features.size(); ++j)
                if (a.features[i].id == b.features[j].id) oracle.push_back({i, j, a.features[i].id});
        std::sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) { return x.id < y.id; });
        const auto m = match_frames(a, b);
        total += oracle.size();
        if (m.size() != oracle.size()) {
            ++discrepancies;
            continue;
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i].id != oracle[i].id || m[i].index_a != oracle[i].index_a || m[i].index_b != oracle[i].index_b) {
                ++discrepancies;
                break;
            }
        }
    }
    const double secs = elapsed_s(t0);
    REQUIRE(discrepancies == 0, fmt("%.0f pairs disagree", double(discrepancies)));
    REQUIRE(secs < 10.0, fmt("took %.2f s", secs));
    return {true, fmt("1000 pairs, %.0f matches, 0 discrepancies, %.2f s", double(total), secs)};
}

template <class A, class B>
double rel_dev(const A& analytic, const B& numeric) {
    const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

Outcome jacobians() {
    std::mt19937_64 rng(500);
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
            fd_pose.col(i) = (*project_point(p, retract(pose, d), k) - *project_point(p, retract(pose, -d), k)) / (2 * eps);
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
    REQUIRE(worst < 1e-5, fmt("max relative error %.3g", worst));
    return {true, fmt("500 configurations, max relative error %.2g", worst)};
}

bool monotone(const LmSolution& s) {
    for (std::size_t i = 1; i < s.cost_trace.size(); ++i)
        if (s.cost_trace[i] > s.cost_trace[i - 1]) return false;
    return true;
}

Outcome ba_behavior() {
    const auto k = square(60, 1000);
    std::size_t solves = 0;
    double worst_rms = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<RigidPose> poses;
        for (int i = 0; i < 5; ++i) {
            const double a = 0.3 * i;
            poses.push_back(test::look_at(Vec3(3 * std::sin(a), 0.2 * i, 3 * std::cos(a)), Vec3::Zero()));
        }
        auto fx = test::make_map_fixture(poses, test::random_points(rng, 50, Vec3::Zero(), 1.0), k);
        std::map<KeyFrameId, RigidPose> moved_poses;
        for (const auto& [id, kf] : fx.map.keyframes()) {
            if (id < 2) continue;
            Vec6 d;
            d.head<3>() = test::random_unit(rng) * 0.01;
            d.tail<3>() = test::random_unit(rng) * 0.01;
            moved_poses[id] = retract(kf.pose, d);
        }
        std::map<VertexId, Vec3> moved_points;
        for (const auto& [id, p] : fx.map.points()) moved_points[id] = p.position + test::random_unit(rng) * 1e-2;
        fx.map.apply_update(moved_poses, moved_points);
        const auto rep = windowed_ba(fx.map, last_keyframes(fx.map, 5), k, LmSettings{});
        ++solves;
        REQUIRE(rep.status == BaStatus::optimized, "fixture solve failed: " + rep.message);
        REQUIRE(monotone(rep.solution), "fixture cost increased");
        worst_rms = std::max(worst_rms, test::rms_reprojection(fx.map, k));
    }
    REQUIRE(worst_rms < 1e-8, fmt("fixture RMS %.3g px", worst_rms));

    // every solve of a noisy tracking run
    RunConfig cfg;
    cfg.duration_s = 10.0;
    cfg.pixel_noise_sigma = 1.0;
    cfg.seed = 7;
    const auto mesh = generate_scene(cfg.scene);
    SystemOptions opts;
    opts.keep_ba_traces = true;
    SlamSystem sys(cfg.intrinsics, cfg.slam, opts);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.pixel_noise_sigma);
    for (int i = 0; i < 300; ++i) {
        const double t = i / cfg.input_fps;
        auto f = capture_frame(mesh, trajectory_pose(cfg.trajectory, t), cfg.intrinsics, cfg.capture, i, t);
        for (auto& x : f.features) {
            x.u += noise(rng);
            x.v += noise(rng);
        }
        sys.process_frame(f);
    }
    sys.wait_idle();
    std::size_t pose_solves = 0;
    for (const auto& r : sys.ba_reports()) {
        if (r.status != BaStatus::optimized) continue;
        ++pose_solves;
        REQUIRE(monotone(r.solution), "windowed solve cost increased");
    }
    REQUIRE(pose_solves > 0, "noisy run produced no windowed solves");
    return {true, fmt("fixture RMS %.2g px over %.0f seeds, %.0f noisy-run solves monotone", worst_rms, double(solves),
                      double(pose_solves))};
}

RunConfig e2e_config(double fps, double sigma) {
    RunConfig c;
    c.input_fps = fps;
    c.pixel_noise_sigma = sigma;
    c.duration_s = 20.0;
    c.seed = 1;
    c.out_dir = "";
    return c;
}

Outcome end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    for (double fps : {30.0, 60.0, 75.0}) {
        const auto r = run_offline(e2e_config(fps, 0.0));
        REQUIRE(r.ate, fmt("no ATE at %.0f fps", fps) + ": " + r.ate_note);
        REQUIRE(r.frames_lost == 0, fmt("%.0f frames lost at %.0f fps", double(r.frames_lost), fps));
        REQUIRE(r.ate->rmse < 1e-3, fmt("ATE %.3g at %.0f fps", r.ate->rmse, fps));
        detail += fmt("%.0f fps %.2g, ", fps, r.ate->rmse);
    }
    double prev = -1.0;
    for (double sigma : {0.0, 0.5, 2.0}) {
        const auto r = run_offline(e2e_config(75.0, sigma));
        REQUIRE(r.ate, fmt("no ATE at sigma %.1f", sigma));
        REQUIRE(r.ate->rmse > prev, fmt("ATE not increasing at sigma %.1f (%.3g <= %.3g)", sigma, r.ate->rmse, prev));
        prev = r.ate->rmse;
        detail += fmt("sigma %.1f %.2g, ", sigma, r.ate->rmse);
    }
    const double secs = elapsed_s(t0);
    REQUIRE(secs < 120.0, fmt("took %.1f s", secs));
    return {true, detail + fmt("%.1f s", secs)};
}

Outcome frame_skipping() {
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = e2e_config(75.0, 0.0);
    cfg.track_delay_ms = 100.0;
    const auto r = run_offline(cfg);
    const double secs = elapsed_s(t0);
    REQUIRE(r.frames_skipped > 0, "no frames skipped");
    REQUIRE(r.keyframes > 0, "no keyframes");
    REQUIRE(r.estimate.samples.size() >= r.keyframes, "fewer trajectory samples than keyframes");
    REQUIRE(secs < 60.0, fmt("took %.1f s", secs));
    return {true, fmt("skipped %.0f of %.0f, %.0f poses, %.0f keyframes", double(r.frames_skipped),
                      double(r.frames_total), double(r.estimate.samples.size()), double(r.keyframes)) +
                      fmt(", %.1f s", secs)};
}

Outcome capture_scaling() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = benchmark_capture({600, 60000, 240000, 480000, 2000000}, 15);
    const double secs = elapsed_s(t0);
    std::string detail;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        detail += fmt("%.0f:%.3gms ", double(r.rows[i].count), r.rows[i].median_ms);
        REQUIRE(i == 0 || r.rows[i].median_ms > r.rows[i - 1].median_ms, "medians not monotone: " + detail);
    }
    REQUIRE(r.r_squared && *r.r_squared > 0.99, fmt("R^2 %.4f", r.r_squared.value_or(0.0)) + " " + detail);
    REQUIRE(secs < 300.0, fmt("took %.1f s", secs));
    return {true, detail + fmt("R^2 %.5f, %.1f s", *r.r_squared, secs)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string frames_without_timing(const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() > 4) cols.erase(cols.begin() + 4);  // track_ms
        for (const auto& c : cols) out += c + ",";
        out += "\n";
    }
    return out;
}

Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / "vslam_acceptance_det";
    fs::remove_all(base);
    auto cfg = e2e_config(30.0, 1.0);
    cfg.seed = 11;
    cfg.out_dir = (base / "a").string();
    run_offline(cfg);
    cfg.out_dir = (base / "b").string();
    run_offline(cfg);
    const fs::path a = base / "a", b = base / "b";
    const bool est = slurp(a / "est.txt") == slurp(b / "est.txt") && !slurp(a / "est.txt").empty();
    const bool map = slurp(a / "map.txt") == slurp(b / "map.txt") && !slurp(a / "map.txt").empty();
    const bool frames = frames_without_timing(a / "frames.csv") == frames_without_timing(b / "frames.csv");
    fs::remove_all(base);
    REQUIRE(est, "est.txt differs");
    REQUIRE(map, "map.txt differs");
    REQUIRE(frames, "frames.csv differs");
    return {true, "est.txt, map.txt, frames.csv identical"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"projection oracle", projection_oracle},
        {"matching exactness", matching_exactness},
        {"jacobian correctness", jacobians},
        {"bundle adjustment", ba_behavior},
        {"end-to-end accuracy", end_to_end},
        {"frame skipping", frame_skipping},
        {"capture scaling", capture_scaling},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  %-22s %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.ok) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
