#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "vslam/geometry.hpp"
#include "vslam/projection.hpp"
#include "vslam/slam.hpp"

namespace vslam::harness {

enum class TrajectoryKind { orbit, lissajous, file };

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::orbit;
    std::string path;  // kind == file
    // orbit: (r cos wt, h, r sin wt), looking at `target`
    double radius = 1.0;
    double height = 0.0;
    double angular_speed = 0.25;  // rad/s
    // lissajous: center + amplitude * sin(2 pi frequency t + phase), phases drawn from seed
    Vec3 center = Vec3::Zero();
    Vec3 amplitude = Vec3(0.8, 0.2, 0.8);
    Vec3 frequency = Vec3(0.05, 0.11, 0.07);  // Hz
    std::uint64_t seed = 0;
    Vec3 target = Vec3::Zero();
    double sample_hz = 200.0;
};

enum class RunMode { offline, live };

struct RunConfig {
    SceneSpec scene;
    TrajectorySpec trajectory;
    CameraIntrinsics intrinsics;
    CaptureConfig capture;
    SlamConfig slam;

    double input_fps = 30.0;
    double pixel_noise_sigma = 0.0;
    double duration_s = 20.0;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    RunMode mode = RunMode::offline;
    int port = 8765;

    double max_dt = -1.0;        // ATE association window; negative means half the frame interval
    double track_cost_ms = 0.0;  // modeled tracker cost on the simulated timeline
    double track_delay_ms = 0.0; // injected tracker delay (test hook), slept and charged to the timeline
    bool measured_skip = false;  // charge measured tracker wall time instead of track_cost_ms (not reproducible)
    bool ba_trace = false;       // dump windowed-BA iteration traces

    double live_tick_hz = 72.0;
    double live_push_hz = 30.0;

    double effective_max_dt() const { return max_dt >= 0.0 ? max_dt : 0.5 / input_fps; }
    void validate() const;
};

/// Applies one dotted "key = value" setting. Throws Error on unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat "key = value" text, '#' comments, dotted keys (slam.ba_window = 5).
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Every setting as key -> value text, in the same vocabulary apply_setting accepts.
std::map<std::string, std::string> describe(const RunConfig& cfg);

std::string to_string(TrajectoryKind kind);
std::string to_string(RunMode mode);

}  // namespace vslam::harness
