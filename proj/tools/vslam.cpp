#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "vslam/harness/benchmark.hpp"
#include "vslam/harness/config.hpp"
#include "vslam/harness/live_server.hpp"
#include "vslam/harness/offline_runner.hpp"
#include "vslam/harness/trajectory_gen.hpp"

using namespace vslam;
using namespace vslam::harness;

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<double> fps;
    std::optional<double> noise_sigma;
    std::optional<std::uint64_t> seed;
    std::optional<int> port;
    std::optional<double> duration;
    std::vector<std::string> sets;  // --set key=value
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "flat key = value config file");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--fps", f.fps, "input frame rate (Hz)");
    app->add_option("--noise-sigma", f.noise_sigma, "pixel noise sigma (px)");
    app->add_option("--seed", f.seed, "noise seed");
    app->add_option("--port", f.port, "live server port");
    app->add_option("--duration", f.duration, "duration (s)");
    app->add_option("--set", f.sets, "override any config key, e.g. --set slam.ba_window=7");
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config.empty()) cfg = load_config(f.config);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.fps) cfg.input_fps = *f.fps;
    if (f.noise_sigma) cfg.pixel_noise_sigma = *f.noise_sigma;
    if (f.seed) cfg.seed = *f.seed;
    if (f.port) cfg.port = *f.port;
    if (f.duration) cfg.duration_s = *f.duration;
    cfg.validate();
    return cfg;
}

MeshModel scene_for(const RunConfig& cfg) { return generate_scene(cfg.scene); }

int cmd_run(const CommonFlags& f) {
    RunConfig cfg = resolve(f);
    const RunReport r = run_offline(cfg);
    write_report_text(std::cout, r, cfg);
    return 0;
}

int cmd_serve(const CommonFlags& f, const std::string& address) {
    RunConfig cfg = resolve(f);
    LiveServer server(cfg, scene_for(cfg));
    const auto port = server.listen(address, static_cast<unsigned short>(cfg.port));
    std::cerr << "listening on ws://" << address << ':' << port << '\n';
    server.run(true);
    return 0;
}

int cmd_bench(const std::vector<std::size_t>& counts, int reps, std::uint64_t seed, const std::string& out) {
    const auto result = benchmark_capture(counts, reps, {}, seed);
    write_bench_csv(std::cout, result);
    if (result.r_squared) std::printf("# linear fit R^2 = %.6f, slope = %.3e ms/vertex\n", *result.r_squared, result.slope_ms);
    else std::printf("# linear fit R^2 undefined\n");
    if (!out.empty()) {
        std::ofstream o(out);
        if (!o) throw Error("cannot write " + out);
        write_bench_csv(o, result);
    }
    return 0;
}

int cmd_gen_scene(const CommonFlags& f, const std::string& out) {
    const RunConfig cfg = resolve(f);
    const MeshModel mesh = scene_for(cfg);
    if (out.empty() || out == "-") write_obj(std::cout, mesh);
    else save_obj(out, mesh);
    return 0;
}

int cmd_gen_traj(const CommonFlags& f, const std::string& out) {
    const RunConfig cfg = resolve(f);
    const Trajectory t = generate_trajectory(cfg.trajectory, cfg.duration_s);
    if (out.empty() || out == "-") write_trajectory(std::cout, t);
    else save_trajectory(out, t);
    return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, double max_dt, const std::string& errors_csv) {
    const Trajectory est = load_trajectory(est_path);
    const Trajectory gt = load_trajectory(gt_path);
    const AteReport r = ate_rmse(est, gt, max_dt);
    std::printf("ate.rmse = %.9g\nate.mean = %.9g\nate.median = %.9g\nate.max = %.9g\nate.n_matched = %zu\nate.scale = %.9g\n",
                r.rmse, r.mean, r.median, r.max, r.n_matched, r.alignment.scale);
    if (!errors_csv.empty()) {
        std::ofstream o(errors_csv);
        if (!o) throw Error("cannot write " + errors_csv);
        write_ate_errors_csv(o, r);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monocular SLAM simulator with mesh vertices as identified features"};
    app.require_subcommand(1);

    CommonFlags run_f, serve_f, scene_f, traj_f;
    auto* run = app.add_subcommand("run", "offline run: frames -> SLAM -> trajectory, map and report");
    add_common(run, run_f);

    auto* serve = app.add_subcommand("serve", "live WebSocket service");
    add_common(serve, serve_f);
    std::string address = "127.0.0.1";
    serve->add_option("--address", address, "bind address");

    auto* bench = app.add_subcommand("bench-capture", "time capture_frame against vertex count");
    std::vector<std::size_t> counts{600, 60000, 240000, 480000, 2000000};
    int reps = 100;
    std::uint64_t bench_seed = 0;
    std::string bench_out;
    bench->add_option("--counts", counts, "ascending vertex counts");
    bench->add_option("--reps", reps, "repetitions per count");
    bench->add_option("--seed", bench_seed, "point cloud seed");
    bench->add_option("--out", bench_out, "CSV output file");

    auto* gen_scene = app.add_subcommand("gen-scene", "write the configured scene as OBJ");
    add_common(gen_scene, scene_f);
    std::string scene_out;
    gen_scene->add_option("-o,--output", scene_out, "OBJ path (default stdout)");

    auto* gen_traj = app.add_subcommand("gen-traj", "write the configured trajectory (TUM format)");
    add_common(gen_traj, traj_f);
    std::string traj_out;
    gen_traj->add_option("-o,--output", traj_out, "trajectory path (default stdout)");

    auto* eval = app.add_subcommand("eval", "ATE between two trajectory files");
    std::string est_path, gt_path, errors_csv;
    double max_dt = 0.01;
    eval->add_option("estimate", est_path, "estimated trajectory")->required();
    eval->add_option("groundtruth", gt_path, "ground-truth trajectory")->required();
    eval->add_option("--max-dt", max_dt, "association window (s)");
    eval->add_option("--errors", errors_csv, "per-sample error CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_f);
        if (*serve) return cmd_serve(serve_f, address);
        if (*bench) return cmd_bench(counts, reps, bench_seed, bench_out);
        if (*gen_scene) return cmd_gen_scene(scene_f, scene_out);
        if (*gen_traj) return cmd_gen_traj(traj_f, traj_out);
        if (*eval) return cmd_eval(est_path, gt_path, max_dt, errors_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
