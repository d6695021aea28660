#pragma once

#include <memory>
#include <string>

#include "vslam/harness/config.hpp"

namespace vslam::harness {

/// WebSocket endpoint for the live session. One interactive client at a time;
/// a second concurrent client gets an error message and is closed. When the
/// client disconnects the session is reset.
class LiveServer {
public:
    LiveServer(const RunConfig& cfg, MeshModel mesh);
    ~LiveServer();

    /// Binds and listens. Port 0 picks a free port; the bound port is returned.
    unsigned short listen(const std::string& address, unsigned short port);
    /// Serves until stop() (or SIGINT/SIGTERM when handle_signals is set).
    void run(bool handle_signals = false);
    /// Thread-safe.
    void stop();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace vslam::harness
