#pragma once

#include "clawtrap/clock.hpp"
#include "clawtrap/matcher.hpp"
#include "clawtrap/transformer.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

enum class FlowError {
    bad_request,
    upstream_refused,
    upstream_timeout,
    dns_failure,
    upstream_tls,
    upstream_protocol,
    response_too_large,
    tls_handshake,
    internal,
};

std::string_view to_string(FlowError error);

/// One audited client exchange.
struct FlowRecord {
    std::uint64_t flow_id = 0;
    std::uint64_t config_generation = 0;
    RequestSummary request;
    MatchOutcome outcome;
    std::optional<TransformOutcome> transform;
    bool mock_served = false;
    bool tunneled = false;
    std::optional<int> upstream_status;
    int client_status = 0;
    std::vector<std::uint64_t> detection_report_ids;
    Timestamp started_at;
    Timestamp completed_at;
    std::optional<FlowError> error;
    std::string error_detail;
};

nlohmann::json to_json(const RequestSummary& request);
nlohmann::json to_json(const MatchOutcome& outcome);
nlohmann::json to_json(const TransformOutcome& outcome);
nlohmann::json to_json(const FlowRecord& record);

}  // namespace clawtrap
