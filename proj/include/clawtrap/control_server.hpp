#pragma once

#include "clawtrap/audit.hpp"
#include "clawtrap/net.hpp"
#include "clawtrap/report_queue.hpp"
#include "clawtrap/runtime_state.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace clawtrap {

/// Formats one audit event as a server-sent event frame.
std::string format_sse_event(const StoredEvent& event);

/// Parses a since_seq value (decimal, non-negative).
std::optional<std::uint64_t> parse_since_seq(std::string_view text);

/// Runtime control API:
///   GET  /api/flows/stream   server-sent audit events, resumable via since_seq or Last-Event-ID
///   GET  /api/status
///   POST /api/mode           {"target": rule id | "all", "enabled": bool}
///   POST /api/rules/reload   body is a complete config document
///   GET  /api/rules
class ControlServer {
public:
    struct Options {
        std::chrono::milliseconds heartbeat{std::chrono::seconds(15)};
        // Bound addresses for /api/status; the configured ones are reported when unset.
        std::function<nlohmann::json()> addresses;
    };

    ControlServer(SharedRuntimeState& state, AuditLog& audit, ReportQueue* reports);
    ControlServer(SharedRuntimeState& state, AuditLog& audit, ReportQueue* reports, Options options);
    ~ControlServer();
    ControlServer(const ControlServer&) = delete;
    ControlServer& operator=(const ControlServer&) = delete;

    bool start(const HostPort& address, std::string& error);
    std::uint16_t port() const { return port_; }
    void stop();

private:
    void install_routes();

    SharedRuntimeState& state_;
    AuditLog& audit_;
    ReportQueue* reports_;
    Options options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
};

}  // namespace clawtrap
