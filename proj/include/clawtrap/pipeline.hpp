#pragma once

#include "clawtrap/audit.hpp"
#include "clawtrap/clock.hpp"
#include "clawtrap/flow.hpp"
#include "clawtrap/report_queue.hpp"
#include "clawtrap/runtime_state.hpp"
#include "clawtrap/upstream.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>

namespace clawtrap {

/// Where a host:port actually gets connected, after static overrides, IP literals and
/// (when asked) DNS.
struct ResolvedTarget {
    std::optional<IpAddress> destination_ip;
    std::uint16_t connect_port = 0;
    bool dns_failed = false;
};

/// Static `resolve` entries win, then IP literals, then DNS when `use_dns` is set.
ResolvedTarget resolve_target(const GlobalConfig& config, const std::string& host, std::uint16_t port,
                              bool use_dns, const Resolver& dns);

struct FlowInput {
    RequestSummary summary;  // destination_ip may be preset, e.g. by a replay
    std::string target;      // origin-form request target sent upstream
    std::string body;
};

struct FlowResult {
    ResponseEnvelope response;
    FlowRecord record;
};

/// The per-exchange pipeline: match, report detections, mock or forward, transform,
/// record. Every call appends exactly one flow-completed event before it returns.
class FlowPipeline {
public:
    FlowPipeline(SharedRuntimeState& state, Upstream& upstream, ReportSink* reports, AuditLog* audit, Clock& clock,
                 Resolver dns = resolve_host, std::uint64_t first_flow_id = 1);

    FlowResult handle_flow(FlowInput input);

    /// For exchanges that never reach handle_flow (tunnels, malformed requests,
    /// failed handshakes): open assigns id, generation and start time; close stamps the
    /// completion time and appends the record.
    FlowRecord open_record(RequestSummary summary);
    void close_record(FlowRecord& record);

    SharedRuntimeState& state() { return state_; }
    Clock& clock() { return clock_; }
    const Resolver& dns() const { return dns_; }

private:
    ResponseEnvelope error_response(FlowRecord& record, FlowError error, const std::string& detail);

    SharedRuntimeState& state_;
    Upstream& upstream_;
    ReportSink* reports_;
    AuditLog* audit_;
    Clock& clock_;
    Resolver dns_;
    std::atomic<std::uint64_t> next_flow_id_;
};

/// Largest flow_id among flow-completed events, for continuing ids across restarts.
std::uint64_t max_recorded_flow_id(const AuditLog& audit);

}  // namespace clawtrap
