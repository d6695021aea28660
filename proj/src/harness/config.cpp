#include "vslam/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace vslam::harness {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
        throw Error("setting " + key + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw Error("setting " + key + ": expected an integer, got '" + v + "'");
    return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const auto n = to_int(key, v);
    if (n < 0) throw Error("setting " + key + " must be non-negative");
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("setting " + key + ": expected a boolean, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
    std::string s = v;
    for (auto& c : s) {
        if (c == ',') c = ' ';
    }
    std::istringstream ss(s);
    std::string a, b, c;
    if (!(ss >> a >> b >> c)) throw Error("setting " + key + ": expected three numbers");
    return {to_double(key, a), to_double(key, b), to_double(key, c)};
}

// shortest text that parses back to the same double
std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z()); }

TrajectoryKind parse_trajectory_kind(const std::string& v) {
    if (v == "orbit") return TrajectoryKind::orbit;
    if (v == "lissajous") return TrajectoryKind::lissajous;
    if (v == "file") return TrajectoryKind::file;
    throw Error("unknown trajectory kind '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"scene.kind", [](RunConfig& c, auto&, auto& v) { c.scene.kind = parse_scene_kind(v); }},
        {"scene.path", [](RunConfig& c, auto&, auto& v) { c.scene.path = v; }},
        {"scene.grid_n", [](RunConfig& c, auto& k, auto& v) { c.scene.grid_n = static_cast<int>(to_int(k, v)); }},
        {"scene.spacing", [](RunConfig& c, auto& k, auto& v) { c.scene.spacing = to_double(k, v); }},
        {"scene.width", [](RunConfig& c, auto& k, auto& v) { c.scene.width = to_double(k, v); }},
        {"scene.height", [](RunConfig& c, auto& k, auto& v) { c.scene.height = to_double(k, v); }},
        {"scene.depth", [](RunConfig& c, auto& k, auto& v) { c.scene.depth = to_double(k, v); }},
        {"scene.subdivision", [](RunConfig& c, auto& k, auto& v) { c.scene.subdivision = static_cast<int>(to_int(k, v)); }},
        {"scene.count", [](RunConfig& c, auto& k, auto& v) { c.scene.count = static_cast<int>(to_int(k, v)); }},
        {"scene.extent", [](RunConfig& c, auto& k, auto& v) { c.scene.extent = to_double(k, v); }},
        {"scene.seed", [](RunConfig& c, auto& k, auto& v) { c.scene.seed = to_count(k, v); }},

        {"trajectory.kind", [](RunConfig& c, auto&, auto& v) { c.trajectory.kind = parse_trajectory_kind(v); }},
        {"trajectory.path", [](RunConfig& c, auto&, auto& v) { c.trajectory.path = v; }},
        {"trajectory.radius", [](RunConfig& c, auto& k, auto& v) { c.trajectory.radius = to_double(k, v); }},
        {"trajectory.height", [](RunConfig& c, auto& k, auto& v) { c.trajectory.height = to_double(k, v); }},
        {"trajectory.angular_speed", [](RunConfig& c, auto& k, auto& v) { c.trajectory.angular_speed = to_double(k, v); }},
        {"trajectory.center", [](RunConfig& c, auto& k, auto& v) { c.trajectory.center = to_vec3(k, v); }},
        {"trajectory.amplitude", [](RunConfig& c, auto& k, auto& v) { c.trajectory.amplitude = to_vec3(k, v); }},
        {"trajectory.frequency", [](RunConfig& c, auto& k, auto& v) { c.trajectory.frequency = to_vec3(k, v); }},
        {"trajectory.target", [](RunConfig& c, auto& k, auto& v) { c.trajectory.target = to_vec3(k, v); }},
        {"trajectory.seed", [](RunConfig& c, auto& k, auto& v) { c.trajectory.seed = to_count(k, v); }},
        {"trajectory.sample_hz", [](RunConfig& c, auto& k, auto& v) { c.trajectory.sample_hz = to_double(k, v); }},

        {"camera.fov_y_deg", [](RunConfig& c, auto& k, auto& v) { c.intrinsics.fov_y_deg = to_double(k, v); }},
        {"camera.width", [](RunConfig& c, auto& k, auto& v) { c.intrinsics.width_px = static_cast<int>(to_int(k, v)); }},
        {"camera.height", [](RunConfig& c, auto& k, auto& v) { c.intrinsics.height_px = static_cast<int>(to_int(k, v)); }},
        {"camera.near", [](RunConfig& c, auto& k, auto& v) { c.intrinsics.near = to_double(k, v); }},
        {"camera.far", [](RunConfig& c, auto& k, auto& v) { c.intrinsics.far = to_double(k, v); }},

        {"capture.z_min", [](RunConfig& c, auto& k, auto& v) { c.capture.z_min = to_double(k, v); }},
        {"capture.z_max", [](RunConfig& c, auto& k, auto& v) { c.capture.z_max = to_double(k, v); }},
        {"capture.cull_outside_image", [](RunConfig& c, auto& k, auto& v) { c.capture.cull_outside_image = to_bool(k, v); }},

        {"slam.min_init_matches", [](RunConfig& c, auto& k, auto& v) { c.slam.min_init_matches = to_count(k, v); }},
        {"slam.min_init_parallax_deg", [](RunConfig& c, auto& k, auto& v) { c.slam.min_init_parallax_deg = to_double(k, v); }},
        {"slam.min_tracked_points", [](RunConfig& c, auto& k, auto& v) { c.slam.min_tracked_points = to_count(k, v); }},
        {"slam.kf_tracked_ratio", [](RunConfig& c, auto& k, auto& v) { c.slam.kf_tracked_ratio = to_double(k, v); }},
        {"slam.ba_window", [](RunConfig& c, auto& k, auto& v) { c.slam.ba_window = to_count(k, v); }},
        {"slam.min_triangulation_parallax_deg",
         [](RunConfig& c, auto& k, auto& v) { c.slam.min_triangulation_parallax_deg = to_double(k, v); }},
        {"slam.max_reproj_px", [](RunConfig& c, auto& k, auto& v) { c.slam.max_reproj_px = to_double(k, v); }},
        {"slam.min_init_cheirality_ratio",
         [](RunConfig& c, auto& k, auto& v) { c.slam.min_init_cheirality_ratio = to_double(k, v); }},
        {"slam.lm.max_iters", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.max_iters = static_cast<int>(to_int(k, v)); }},
        {"slam.lm.initial_damping", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.initial_damping = to_double(k, v); }},
        {"slam.lm.damping_up", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.damping_up = to_double(k, v); }},
        {"slam.lm.damping_down", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.damping_down = to_double(k, v); }},
        {"slam.lm.rel_cost_tol", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.rel_cost_tol = to_double(k, v); }},
        {"slam.lm.grad_tol", [](RunConfig& c, auto& k, auto& v) { c.slam.lm.grad_tol = to_double(k, v); }},

        {"run.fps", [](RunConfig& c, auto& k, auto& v) { c.input_fps = to_double(k, v); }},
        {"run.noise_sigma", [](RunConfig& c, auto& k, auto& v) { c.pixel_noise_sigma = to_double(k, v); }},
        {"run.duration", [](RunConfig& c, auto& k, auto& v) { c.duration_s = to_double(k, v); }},
        {"run.seed", [](RunConfig& c, auto& k, auto& v) { c.seed = to_count(k, v); }},
        {"run.out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
        {"run.mode", [](RunConfig& c, auto&, auto& v) {
             if (v == "offline") c.mode = RunMode::offline;
             else if (v == "live") c.mode = RunMode::live;
             else throw Error("unknown run mode '" + v + "'");
         }},
        {"run.port", [](RunConfig& c, auto& k, auto& v) { c.port = static_cast<int>(to_int(k, v)); }},
        {"run.max_dt", [](RunConfig& c, auto& k, auto& v) { c.max_dt = to_double(k, v); }},
        {"run.track_cost_ms", [](RunConfig& c, auto& k, auto& v) { c.track_cost_ms = to_double(k, v); }},

        {"run.measured_skip", [](RunConfig& c, auto& k, auto& v) { c.measured_skip = to_bool(k, v); }},
        {"debug.track_delay_ms", [](RunConfig& c, auto& k, auto& v) { c.track_delay_ms = to_double(k, v); }},
        {"debug.ba_trace", [](RunConfig& c, auto& k, auto& v) { c.ba_trace = to_bool(k, v); }},

        {"live.tick_hz", [](RunConfig& c, auto& k, auto& v) { c.live_tick_hz = to_double(k, v); }},
        {"live.push_hz", [](RunConfig& c, auto& k, auto& v) { c.live_push_hz = to_double(k, v); }},
    };
    return table;
}

}  // namespace

void RunConfig::validate() const {
    intrinsics.validate();
    capture.validate();
    slam.validate();
    if (!(input_fps > 0.0)) throw Error("run.fps must be positive");
    if (!(pixel_noise_sigma >= 0.0)) throw Error("run.noise_sigma must be non-negative");
    if (!(duration_s >= 0.0)) throw Error("run.duration must be non-negative");
    if (!(trajectory.sample_hz > 0.0)) throw Error("trajectory.sample_hz must be positive");
    if (!(track_cost_ms >= 0.0) || !(track_delay_ms >= 0.0)) throw Error("tracker costs must be non-negative");
    if (!(live_tick_hz > 0.0) || !(live_push_hz > 0.0)) throw Error("live rates must be positive");
    if (port < 0 || port > 65535) throw Error("run.port out of range");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw Error("unknown setting '" + key + "'");
    it->second(cfg, key, value);
}

RunConfig parse_config(std::istream& in, RunConfig base) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_setting(base, key, value);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    return parse_config(in, std::move(base));
}

std::map<std::string, std::string> describe(const RunConfig& c) {
    std::map<std::string, std::string> m;
    m["scene.kind"] = to_string(c.scene.kind);
    m["scene.path"] = c.scene.path;
    m["scene.grid_n"] = std::to_string(c.scene.grid_n);
    m["scene.spacing"] = fmt(c.scene.spacing);
    m["scene.width"] = fmt(c.scene.width);
    m["scene.height"] = fmt(c.scene.height);
    m["scene.depth"] = fmt(c.scene.depth);
    m["scene.subdivision"] = std::to_string(c.scene.subdivision);
    m["scene.count"] = std::to_string(c.scene.count);
    m["scene.extent"] = fmt(c.scene.extent);
    m["scene.seed"] = std::to_string(c.scene.seed);
    m["trajectory.kind"] = to_string(c.trajectory.kind);
    m["trajectory.path"] = c.trajectory.path;
    m["trajectory.radius"] = fmt(c.trajectory.radius);
    m["trajectory.height"] = fmt(c.trajectory.height);
    m["trajectory.angular_speed"] = fmt(c.trajectory.angular_speed);
    m["trajectory.center"] = fmt(c.trajectory.center);
    m["trajectory.amplitude"] = fmt(c.trajectory.amplitude);
    m["trajectory.frequency"] = fmt(c.trajectory.frequency);
    m["trajectory.target"] = fmt(c.trajectory.target);
    m["trajectory.seed"] = std::to_string(c.trajectory.seed);
    m["trajectory.sample_hz"] = fmt(c.trajectory.sample_hz);
    m["camera.fov_y_deg"] = fmt(c.intrinsics.fov_y_deg);
    m["camera.width"] = std::to_string(c.intrinsics.width_px);
    m["camera.height"] = std::to_string(c.intrinsics.height_px);
    m["camera.near"] = fmt(c.intrinsics.near);
    m["camera.far"] = fmt(c.intrinsics.far);
    m["capture.z_min"] = fmt(c.capture.z_min);
    m["capture.z_max"] = fmt(c.capture.z_max);
    m["capture.cull_outside_image"] = c.capture.cull_outside_image ? "true" : "false";
    m["slam.min_init_matches"] = std::to_string(c.slam.min_init_matches);
    m["slam.min_init_parallax_deg"] = fmt(c.slam.min_init_parallax_deg);
    m["slam.min_tracked_points"] = std::to_string(c.slam.min_tracked_points);
    m["slam.kf_tracked_ratio"] = fmt(c.slam.kf_tracked_ratio);
    m["slam.ba_window"] = std::to_string(c.slam.ba_window);
    m["slam.min_triangulation_parallax_deg"] = fmt(c.slam.min_triangulation_parallax_deg);
    m["slam.max_reproj_px"] = fmt(c.slam.max_reproj_px);
    m["slam.min_init_cheirality_ratio"] = fmt(c.slam.min_init_cheirality_ratio);
    m["slam.lm.max_iters"] = std::to_string(c.slam.lm.max_iters);
    m["slam.lm.initial_damping"] = fmt(c.slam.lm.initial_damping);
    m["slam.lm.damping_up"] = fmt(c.slam.lm.damping_up);
    m["slam.lm.damping_down"] = fmt(c.slam.lm.damping_down);
    m["slam.lm.rel_cost_tol"] = fmt(c.slam.lm.rel_cost_tol);
    m["slam.lm.grad_tol"] = fmt(c.slam.lm.grad_tol);
    m["run.fps"] = fmt(c.input_fps);
    m["run.noise_sigma"] = fmt(c.pixel_noise_sigma);
    m["run.duration"] = fmt(c.duration_s);
    m["run.seed"] = std::to_string(c.seed);
    m["run.out_dir"] = c.out_dir;
    m["run.mode"] = to_string(c.mode);
    m["run.port"] = std::to_string(c.port);
    m["run.max_dt"] = fmt(c.max_dt);
    m["run.track_cost_ms"] = fmt(c.track_cost_ms);
    m["run.measured_skip"] = c.measured_skip ? "true" : "false";
    m["debug.track_delay_ms"] = fmt(c.track_delay_ms);
    m["debug.ba_trace"] = c.ba_trace ? "true" : "false";
    m["live.tick_hz"] = fmt(c.live_tick_hz);
    m["live.push_hz"] = fmt(c.live_push_hz);
    return m;
}

std::string to_string(TrajectoryKind kind) {
    switch (kind) {
        case TrajectoryKind::orbit: return "orbit";
        case TrajectoryKind::lissajous: return "lissajous";
        case TrajectoryKind::file: return "file";
    }
    return "unknown";
}

std::string to_string(RunMode mode) { return mode == RunMode::offline ? "offline" : "live"; }

}  // namespace vslam::harness
