#include "vslam/harness/live_session.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vslam/harness/trajectory_gen.hpp"

namespace vslam::harness {

using nlohmann::json;

namespace {

constexpr double kMaxPitch = 85.0 * kPi / 180.0;

json pose_array(const RigidPose& p) {
    const auto& t = p.translation;
    const auto& q = p.rotation;
    return json::array({t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()});
}

std::string error_message(const std::string& msg) { return json{{"type", "error"}, {"msg", msg}}.dump(); }

bool finite_number(const json& j) { return j.is_number() && std::isfinite(j.get<double>()); }

}  // namespace

RigidPose SteerState::pose() const {
    const Quat q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitY())) * Quat(Eigen::AngleAxisd(pitch, Vec3::UnitX()));
    return {q, position};
}

SteerState SteerState::from_pose(const RigidPose& pose) {
    const Vec3 f = -pose.rotation_matrix().col(2);
    SteerState s;
    s.position = pose.translation;
    s.pitch = std::asin(std::clamp(f.y(), -1.0, 1.0));
    s.yaw = std::atan2(-f.x(), -f.z());
    return s;
}

void SteerState::integrate(const Vec3& move, double yaw_rate, double pitch_rate, double dt) {
    position += pose().rotation * move * dt;
    yaw += yaw_rate * dt;
    pitch = std::clamp(pitch + pitch_rate * dt, -kMaxPitch, kMaxPitch);
}

LiveSession::LiveSession(const RunConfig& cfg, MeshModel mesh, LiveSessionOptions options)
    : cfg_(cfg), mesh_(std::move(mesh)), options_(options), rng_(cfg.seed) {
    cfg_.validate();
    start_ = SteerState::from_pose(trajectory_pose(cfg_.trajectory, 0.0));
    steer_ = start_;
    start();
}

LiveSession::~LiveSession() { stop(); }

void LiveSession::start() {
    SystemOptions opts;
    opts.synchronous_mapping = options_.synchronous;
    slam_ = std::make_unique<SlamSystem>(cfg_.intrinsics, cfg_.slam, opts);
    latest_ = {};
    in_flight_ = 0;
    tracker_error_ = nullptr;
    if (!options_.synchronous) {
        mailbox_ = std::make_unique<Mailbox<FeatureFrame>>(1);
        tracker_ = std::thread([this] { tracker_loop(); });
    }
}

void LiveSession::stop() {
    if (mailbox_) mailbox_->close();
    if (tracker_.joinable()) tracker_.join();
    mailbox_.reset();
    slam_.reset();
}

void LiveSession::reset() {
    stop();
    steer_ = start_;
    paused_ = false;
    next_frame_id_ = 0;
    frames_skipped_ = 0;
    rng_.seed(cfg_.seed);
    sent_version_ = 0;
    sent_points_.clear();
    sent_keyframes_.clear();
    last_state_key_.reset();
    last_push_s_ = -1e300;
    start();
}

void LiveSession::record(const FeatureFrame& frame, const FrameOutcome& out) {
    std::lock_guard lk(latest_mutex_);
    latest_.frame_id = frame.frame_id;
    latest_.mode = out.mode;
    latest_.pose = out.pose;
    latest_.n_tracked = out.n_tracked;
    latest_.any = true;
}

void LiveSession::tracker_loop() {
    while (auto frame = mailbox_->pop()) {
        try {
            const FrameOutcome out = slam_->process_frame(*frame);
            record(*frame, out);
        } catch (...) {
            std::lock_guard lk(latest_mutex_);
            if (!tracker_error_) tracker_error_ = std::current_exception();
        }
        std::lock_guard lk(latest_mutex_);
        --in_flight_;
        idle_cv_.notify_all();
    }
}

void LiveSession::wait_tracker_idle() {
    std::unique_lock lk(latest_mutex_);
    idle_cv_.wait(lk, [&] { return in_flight_ == 0; });
}

std::vector<std::string> LiveSession::on_connect() { return full_sync(); }

std::vector<std::string> LiveSession::full_sync() {
    sent_version_ = 0;
    sent_points_.clear();
    sent_keyframes_.clear();
    std::vector<std::string> out;
    out.push_back(state_message());
    if (auto d = map_delta(true)) out.push_back(*d);
    return out;
}

std::vector<std::string> LiveSession::handle_message(std::string_view text) {
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::exception&) {
        return {error_message("malformed message: not JSON")};
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
        return {error_message("malformed message: missing type")};
    }
    const std::string type = msg["type"].get<std::string>();
    if (type == "steer") {
        if (!msg.contains("dt") || !finite_number(msg["dt"]) || msg["dt"].get<double>() < 0.0) return {error_message("bad steer")};
        Vec3 move = Vec3::Zero();
        if (msg.contains("move")) {
            const auto& m = msg["move"];
            if (!m.is_array() || m.size() != 3) return {error_message("bad steer")};
            for (int i = 0; i < 3; ++i) {
                if (!finite_number(m[i])) return {error_message("bad steer")};
                move[i] = m[i].get<double>();
            }
        }
        double rates[2] = {0.0, 0.0};
        const char* keys[2] = {"yaw", "pitch"};
        for (int i = 0; i < 2; ++i) {
            if (!msg.contains(keys[i])) continue;
            if (!finite_number(msg[keys[i]])) return {error_message("bad steer")};
            rates[i] = msg[keys[i]].get<double>();
        }
        if (!paused_) steer_.integrate(move, rates[0], rates[1], msg["dt"].get<double>());
        return {};
    }
    if (type == "reset") {
        reset();
        return full_sync();
    }
    if (type == "pause") {
        if (!msg.contains("on") || !msg["on"].is_boolean()) return {error_message("bad pause")};
        paused_ = msg["on"].get<bool>();
        return {};
    }
    if (type == "resync") return full_sync();
    return {error_message("unknown message type '" + type + "'")};
}

std::vector<std::string> LiveSession::tick(double now_s) {
    {
        std::lock_guard lk(latest_mutex_);
        if (tracker_error_) {
            const auto err = tracker_error_;
            tracker_error_ = nullptr;
            try {
                std::rethrow_exception(err);
            } catch (const std::exception& e) {
                return {error_message(std::string("tracking failed: ") + e.what())};
            }
        }
    }
    if (!paused_) {
        const RigidPose gt = steer_.pose();
        const double t = static_cast<double>(next_frame_id_) / cfg_.live_tick_hz;
        FeatureFrame frame = capture_frame(mesh_, gt, cfg_.intrinsics, cfg_.capture, next_frame_id_, t);
        ++next_frame_id_;
        frame.gt_pose = gt;
        if (cfg_.pixel_noise_sigma > 0.0) {
            std::normal_distribution<double> n(0.0, cfg_.pixel_noise_sigma);
            for (auto& f : frame.features) {
                f.u += n(rng_);
                f.v += n(rng_);
            }
        }
        if (options_.synchronous) {
            try {
                record(frame, slam_->process_frame(frame));
            } catch (const std::exception& e) {
                return {error_message(std::string("tracking failed: ") + e.what())};
            }
        } else {
            std::lock_guard lk(latest_mutex_);
            ++in_flight_;
            // capacity-1 hand-off: a busy tracker means this frame is dropped
            if (!mailbox_->try_push(std::move(frame))) {
                --in_flight_;
                ++frames_skipped_;
            }
        }
    }

    std::vector<std::string> out;
    if (now_s - last_push_s_ < 1.0 / cfg_.live_push_hz - 1e-9) return out;
    std::string state = state_message();
    const bool map_changed = slam_->map_version() != sent_version_;
    // frame_id alone changing is not a pose change
    json key = json::parse(state);
    key.erase("frame_id");
    const std::string state_key = key.dump();
    if (!map_changed && last_state_key_ == state_key) return out;
    last_state_key_ = state_key;
    last_push_s_ = now_s;
    out.push_back(std::move(state));
    if (map_changed) {
        if (auto d = map_delta(false)) out.push_back(*d);
    }
    return out;
}

std::string LiveSession::state_message() {
    Latest l;
    {
        std::lock_guard lk(latest_mutex_);
        l = latest_;
    }
    json j;
    j["type"] = "state";
    j["frame_id"] = l.frame_id;
    j["mode"] = to_string(l.mode);
    j["pose_est"] = l.pose ? pose_array(*l.pose) : json(nullptr);
    j["pose_gt"] = pose_array(steer_.pose());
    j["n_tracked"] = l.n_tracked;
    j["map_version"] = slam_->map_version();
    j["n_points"] = slam_->with_map([](const SlamMap& m) { return m.points().size(); });
    j["paused"] = paused_;
    return j.dump();
}

std::optional<std::string> LiveSession::map_delta(bool full) {
    const MapSnapshot snap = slam_->snapshot();
    json points = json::array();
    json kfs = json::array();
    for (const auto& [id, p] : snap.points) {
        auto it = sent_points_.find(id);
        if (it != sent_points_.end() && it->second == p) continue;
        sent_points_[id] = p;
        points.push_back(json::array({id, p.x(), p.y(), p.z()}));
    }
    for (const auto& [id, pose] : snap.keyframes) {
        auto it = sent_keyframes_.find(id);
        if (it != sent_keyframes_.end() && it->second.translation == pose.translation &&
            it->second.rotation.coeffs() == pose.rotation.coeffs()) {
            continue;
        }
        sent_keyframes_[id] = pose;
        json row = pose_array(pose);
        row.insert(row.begin(), id);
        kfs.push_back(row);
    }
    if (!full && points.empty() && kfs.empty() && snap.version == sent_version_) return std::nullopt;
    json j;
    j["type"] = "map_delta";
    j["from_version"] = full ? 0 : sent_version_;
    j["version"] = snap.version;
    j["added_points"] = std::move(points);
    j["added_keyframes"] = std::move(kfs);
    sent_version_ = snap.version;
    return j.dump();
}

}  // namespace vslam::harness
