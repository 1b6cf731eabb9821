#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "teleop/config.hpp"

namespace teleop {

struct ServiceOptions {
    std::string bind_address = "127.0.0.1";
    unsigned short port = 8080;  // 0 picks an ephemeral port
    ScenarioConfig config;
    double snapshot_hz = 60.0;
    double metrics_hz = 5.0;
    std::size_t client_queue = 64;  // per-connection outgoing messages
};

/// Control-loop timing since the server started.
struct LoopStats {
    std::uint64_t ticks = 0;       // loop iterations (idle or running)
    std::uint64_t steps = 0;       // session steps executed
    double elapsed_s = 0.0;
    std::uint64_t overruns = 0;    // resyncs after falling far behind
    double max_lateness_s = 0.0;   // worst wake-up delay past a deadline
    std::uint64_t snapshots = 0;
    std::uint64_t dropped_messages = 0;  // outbox + per-connection drops
};

/// `/session` WebSocket and `/healthz` HTTP endpoint over one control loop.
/// The loop runs on its own thread at the configured rate and only touches
/// bounded queues, so slow clients never stall it.
class SessionServer {
public:
    explicit SessionServer(ServiceOptions options);
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and starts the io, dispatch and loop threads; returns at once.
    /// Throws std::runtime_error when the address cannot be bound.
    void start();
    void stop();
    unsigned short port() const;
    LoopStats stats() const;

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

/// Build/version information reported by `/healthz`.
std::string build_info_json();

}  // namespace teleop
