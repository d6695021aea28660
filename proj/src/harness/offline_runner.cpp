#include "vslam/harness/offline_runner.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "vslam/concurrency.hpp"
#include "vslam/harness/trajectory_gen.hpp"
#include "vslam/system.hpp"

namespace vslam::harness {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void add_pixel_noise(FeatureFrame& frame, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& f : frame.features) {
        f.u += n(rng);
        f.v += n(rng);
    }
}

template <class F>
void write_file(const std::filesystem::path& path, F&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

TimingStats summarize_ms(std::vector<double> values) {
    TimingStats s;
    s.samples = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    s.median_ms = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    // nearest-rank percentile
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = values[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

RunReport run_offline(const RunConfig& cfg, const RunHooks& hooks) {
    cfg.validate();
    return run_offline(cfg, generate_scene(cfg.scene), hooks);
}

RunReport run_offline(const RunConfig& cfg, const MeshModel& mesh, const RunHooks& hooks) {
    cfg.validate();
    RunReport report;
    report.max_dt = cfg.effective_max_dt();

    const double dt = 1.0 / cfg.input_fps;
    const auto n_ticks = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.input_fps + 1e-9));

    std::optional<Trajectory> file_traj;
    if (cfg.trajectory.kind == TrajectoryKind::file) file_traj = generate_trajectory(cfg.trajectory, 0.0);
    auto gt_at = [&](double t) {
        return file_traj ? file_traj->interpolate(t) : trajectory_pose(cfg.trajectory, t);
    };

    SystemOptions opts;
    opts.keep_ba_traces = cfg.ba_trace;
    SlamSystem slam(cfg.intrinsics, cfg.slam, opts);

    std::mutex rec_mutex;
    std::vector<FrameRecord> records;
    std::vector<double> track_times;
    Mailbox<FeatureFrame> mailbox(1);
    const auto delay = std::chrono::duration<double, std::milli>(cfg.track_delay_ms);

    // measured_skip: the driver waits for each frame's wall time before advancing the simulated clock
    std::condition_variable done_cv;
    std::size_t frames_done = 0;
    double last_ms = 0.0;

    std::exception_ptr tracker_error;
    std::thread tracker([&] {
        try {
            while (auto frame = mailbox.pop()) {
                const auto t0 = Clock::now();
                const FrameOutcome out = slam.process_frame(*frame);
                if (cfg.track_delay_ms > 0.0) std::this_thread::sleep_for(delay);
                const double ms = ms_since(t0);
                FrameRecord r;
                r.frame_id = frame->frame_id;
                r.t = frame->timestamp;
                r.captured_features = frame->features.size();
                r.matched = out.matched;
                r.track_ms = ms;
                r.lost = out.lost;
                std::lock_guard lk(rec_mutex);
                records.push_back(r);
                track_times.push_back(ms);
                last_ms = ms;
                ++frames_done;
                done_cv.notify_all();
            }
        } catch (...) {
            std::lock_guard lk(rec_mutex);
            tracker_error = std::current_exception();
            mailbox.close();
            done_cv.notify_all();
        }
    });

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> capture_times;
    const double cost_s = (cfg.track_cost_ms + cfg.track_delay_ms) / 1000.0;
    double busy_until = -1.0;
    std::size_t handed_off = 0;
    try {
        for (std::size_t k = 0; k < n_ticks; ++k) {
            const double t = static_cast<double>(k) * dt;
            const RigidPose gt = gt_at(t);
            report.ground_truth.samples.push_back({t, gt});
            if (t < busy_until) {
                FrameRecord r;
                r.frame_id = k;
                r.t = t;
                r.skipped = true;
                std::lock_guard lk(rec_mutex);
                records.push_back(r);
                continue;
            }
            const auto t0 = Clock::now();
            FeatureFrame frame = capture_frame(mesh, gt, cfg.intrinsics, cfg.capture, k, t);
            capture_times.push_back(ms_since(t0));
            frame.gt_pose = gt;
            add_pixel_noise(frame, cfg.pixel_noise_sigma, rng);
            if (hooks.frame_filter) hooks.frame_filter(frame);
            if (!mailbox.push(std::move(frame))) break;  // tracker failed
            ++handed_off;
            if (cfg.measured_skip) {
                std::unique_lock lk(rec_mutex);
                done_cv.wait(lk, [&] { return frames_done == handed_off || tracker_error; });
                busy_until = t + (last_ms + cfg.track_cost_ms) / 1000.0;
            } else {
                busy_until = t + cost_s;
            }
        }
    } catch (...) {
        mailbox.close();
        tracker.join();
        throw;
    }
    mailbox.close();
    tracker.join();
    if (tracker_error) std::rethrow_exception(tracker_error);
    slam.wait_idle();

    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
    report.frames = std::move(records);
    report.frames_total = report.frames.size();
    for (const auto& r : report.frames) {
        if (r.skipped) ++report.frames_skipped;
        else ++report.frames_processed;
        if (r.lost) ++report.frames_lost;
    }
    report.capture = summarize_ms(capture_times);
    report.track = summarize_ms(track_times);
    report.final_mode = slam.mode();
    report.initialized = report.final_mode != TrackingMode::uninitialized;
    report.estimate.samples = slam.trajectory();
    report.map = slam.snapshot();
    report.keyframes = report.map.keyframes.size();
    report.map_points = report.map.points.size();
    report.map_rms_px = slam.with_map([&](const SlamMap& m) { return map_rms_reprojection(m, cfg.intrinsics); });

    if (report.estimate.samples.size() < 3) {
        report.ate_note = "fewer than 3 estimated poses";
    } else {
        try {
            report.ate = ate_rmse(report.estimate, report.ground_truth, report.max_dt);
        } catch (const Error& e) {
            report.ate_note = e.what();
        }
    }

    if (!cfg.out_dir.empty()) {
        const std::filesystem::path dir(cfg.out_dir);
        std::filesystem::create_directories(dir);
        auto emit = [&](const std::string& name, auto&& body) {
            write_file(dir / name, body);
            report.artifacts.push_back(name);
        };
        emit("est.txt", [&](std::ostream& o) { write_trajectory(o, report.estimate); });
        emit("gt.txt", [&](std::ostream& o) { write_trajectory(o, report.ground_truth); });
        emit("map.txt", [&](std::ostream& o) { write_map_snapshot(o, report.map); });
        emit("frames.csv", [&](std::ostream& o) { write_frames_csv(o, report.frames); });
        if (report.ate) emit("ate_errors.csv", [&](std::ostream& o) { write_ate_errors_csv(o, *report.ate); });
        if (cfg.ba_trace) {
            emit("ba_trace.csv", [&](std::ostream& o) {
                o << "window,iter,cost,damping,step_norm\n";
                std::size_t w = 0;
                for (const auto& rep : slam.ba_reports()) {
                    std::ostringstream body;
                    write_lm_trace_csv(body, rep.solution, false);
                    std::istringstream lines(body.str());
                    std::string line;
                    while (std::getline(lines, line)) o << w << ',' << line << '\n';
                    ++w;
                }
            });
        }
        report.artifacts.push_back("report.txt");
        report.artifacts.push_back("report.json");
        write_file(dir / "report.txt", [&](std::ostream& o) { write_report_text(o, report, cfg); });
        write_file(dir / "report.json", [&](std::ostream& o) { o << report_json(report, cfg) << '\n'; });
    }
    return report;
}

void write_frames_csv(std::ostream& out, const std::vector<FrameRecord>& frames) {
    out << "frame_id,t,captured_features,matched,track_ms,skipped,lost\n";
    char buf[160];
    for (const auto& r : frames) {
        std::snprintf(buf, sizeof buf, "%llu,%.9f,%zu,%zu,%.3f,%d,%d\n", static_cast<unsigned long long>(r.frame_id), r.t,
                      r.captured_features, r.matched, r.track_ms, r.skipped ? 1 : 0, r.lost ? 1 : 0);
        out << buf;
    }
}

namespace {

nlohmann::json timing_json(const TimingStats& s) {
    return {{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
}

}  // namespace

std::string report_json(const RunReport& r, const RunConfig& cfg) {
    nlohmann::json j;
    j["frames_total"] = r.frames_total;
    j["frames_processed"] = r.frames_processed;
    j["frames_skipped"] = r.frames_skipped;
    j["frames_lost"] = r.frames_lost;
    j["keyframes"] = r.keyframes;
    j["map_points"] = r.map_points;
    j["initialized"] = r.initialized;
    j["final_mode"] = to_string(r.final_mode);
    j["capture"] = timing_json(r.capture);
    j["track"] = timing_json(r.track);
    j["max_dt"] = r.max_dt;
    j["map_rms_px"] = r.map_rms_px;
    if (r.ate) {
        j["ate"] = {{"rmse", r.ate->rmse},   {"mean", r.ate->mean},         {"median", r.ate->median},
                    {"max", r.ate->max},     {"n_matched", r.ate->n_matched}, {"scale", r.ate->alignment.scale}};
    } else {
        j["ate"] = nullptr;
        j["ate_note"] = r.ate_note;
    }
    j["artifacts"] = r.artifacts;
    nlohmann::json c;
    for (const auto& [k, v] : describe(cfg)) c[k] = v;
    j["config"] = c;
    return j.dump(2);
}

void write_report_text(std::ostream& out, const RunReport& r, const RunConfig& cfg) {
    char buf[256];
    auto line = [&](const char* key, const std::string& v) { out << key << " = " << v << '\n'; };
    auto num = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        line(key, buf);
    };
    if (r.ate) {
        num("ate.rmse", r.ate->rmse);
        num("ate.mean", r.ate->mean);
        num("ate.median", r.ate->median);
        num("ate.max", r.ate->max);
        line("ate.n_matched", std::to_string(r.ate->n_matched));
        num("ate.scale", r.ate->alignment.scale);
    } else {
        line("ate", "unavailable (" + r.ate_note + ")");
    }
    line("frames.total", std::to_string(r.frames_total));
    line("frames.processed", std::to_string(r.frames_processed));
    line("frames.skipped", std::to_string(r.frames_skipped));
    line("frames.lost", std::to_string(r.frames_lost));
    line("map.keyframes", std::to_string(r.keyframes));
    line("map.points", std::to_string(r.map_points));
    num("map.rms_px", r.map_rms_px);
    line("tracking.final_mode", to_string(r.final_mode));
    num("timing.capture.median_ms", r.capture.median_ms);
    num("timing.capture.p95_ms", r.capture.p95_ms);
    num("timing.track.median_ms", r.track.median_ms);
    num("timing.track.p95_ms", r.track.p95_ms);
    num("eval.max_dt", r.max_dt);
    for (const auto& [k, v] : describe(cfg)) out << "config." << k << " = " << v << '\n';
}

}  // namespace vslam::harness
