#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vslam/concurrency.hpp"
#include "vslam/harness/config.hpp"
#include "vslam/system.hpp"

namespace vslam::harness {

/// First-person camera: position plus yaw about world +y and pitch about the camera x axis.
struct SteerState {
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
    double pitch = 0.0;

    RigidPose pose() const;
    static SteerState from_pose(const RigidPose& pose);
    /// Integrates body-frame velocity `move` and angular rates for dt seconds.
    void integrate(const Vec3& move, double yaw_rate, double pitch_rate, double dt);
};

struct LiveSessionOptions {
    /// Process each tick's frame inline instead of through the tracker thread.
    /// No frame is ever dropped, so the session replays a command log exactly.
    bool synchronous = false;
};

/// Protocol logic of the live service, independent of the transport.
///
/// Every call returns the JSON text messages to send to the client, in order.
/// Methods must be called from one context (the connection's executor); the
/// tracker runs on its own thread and mapping on the SLAM system's thread.
class LiveSession {
public:
    LiveSession(const RunConfig& cfg, MeshModel mesh, LiveSessionOptions options = {});
    ~LiveSession();

    LiveSession(const LiveSession&) = delete;
    LiveSession& operator=(const LiveSession&) = delete;

    /// Full snapshot for a newly connected client.
    std::vector<std::string> on_connect();
    std::vector<std::string> handle_message(std::string_view text);
    /// One fixed-rate tick: capture at the current ground-truth pose and offer
    /// the frame to tracking, then maybe push state. `now_s` is the wall clock
    /// used for throttling pushes.
    std::vector<std::string> tick(double now_s);
    /// Fresh SLAM system, camera back at the start pose, unpaused.
    void reset();

    void wait_tracker_idle();
    bool paused() const noexcept { return paused_; }
    RigidPose gt_pose() const { return steer_.pose(); }
    std::uint64_t frames_captured() const noexcept { return next_frame_id_; }
    std::uint64_t frames_skipped() const noexcept { return frames_skipped_; }

private:
    struct Latest {
        std::uint64_t frame_id = 0;
        TrackingMode mode = TrackingMode::uninitialized;
        std::optional<RigidPose> pose;
        std::size_t n_tracked = 0;
        bool any = false;
    };

    void start();
    void stop();
    void tracker_loop();
    void record(const FeatureFrame& frame, const FrameOutcome& out);
    std::string state_message();
    std::optional<std::string> map_delta(bool full);
    std::vector<std::string> full_sync();

    const RunConfig cfg_;
    const MeshModel mesh_;
    const LiveSessionOptions options_;
    SteerState start_;
    SteerState steer_;
    bool paused_ = false;
    std::uint64_t next_frame_id_ = 0;
    std::uint64_t frames_skipped_ = 0;
    std::mt19937_64 rng_;

    std::unique_ptr<SlamSystem> slam_;
    std::unique_ptr<Mailbox<FeatureFrame>> mailbox_;
    std::thread tracker_;
    std::mutex latest_mutex_;
    std::condition_variable idle_cv_;
    std::size_t in_flight_ = 0;  // guarded by latest_mutex_
    Latest latest_;
    std::exception_ptr tracker_error_;

    // What the client has been sent.
    std::uint64_t sent_version_ = 0;
    std::map<VertexId, Vec3> sent_points_;
    std::map<KeyFrameId, RigidPose> sent_keyframes_;
    std::optional<std::string> last_state_key_;
    double last_push_s_ = -1e300;
};

}  // namespace vslam::harness
