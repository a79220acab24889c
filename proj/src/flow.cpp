#include "clawtrap/flow.hpp"

#include <nlohmann/json.hpp>

namespace clawtrap {

using nlohmann::json;

std::string_view to_string(FlowError error) {
    switch (error) {
        case FlowError::bad_request: return "bad-request";
        case FlowError::upstream_refused: return "upstream-refused";
        case FlowError::upstream_timeout: return "upstream-timeout";
        case FlowError::dns_failure: return "dns-failure";
        case FlowError::upstream_tls: return "upstream-tls";
        case FlowError::upstream_protocol: return "upstream-protocol";
        case FlowError::response_too_large: return "response-too-large";
        case FlowError::tls_handshake: return "tls-handshake";
        case FlowError::internal: return "internal";
    }
    return "unknown";
}

namespace {

json stamp(const Timestamp& t) { return {{"wall_ms", t.wall_ms}, {"mono_ns", t.mono_ns}}; }

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const RequestSummary& request) {
    json headers = json::array();
    for (const auto& [k, v] : request.headers) headers.push_back({k, v});
    return {{"method", request.method},
            {"scheme", to_string(request.scheme)},
            {"host", request.host},
            {"port", request.port},
            {"path", request.path},
            {"destination_ip", request.destination_ip ? json(request.destination_ip->to_string()) : json(nullptr)},
            {"headers", std::move(headers)},
            {"received_at", stamp(request.received_at)}};
}

json to_json(const MatchOutcome& outcome) {
    return {{"detections", outcome.detections}, {"mock", opt(outcome.mock)}, {"transform", opt(outcome.transform)}};
}

json to_json(const TransformOutcome& outcome) {
    return {{"applied", outcome.applied},
            {"mode", outcome.mode ? json(to_string(*outcome.mode)) : json(nullptr)},
            {"rule_id", opt(outcome.rule_id)},
            {"bytes_before", outcome.bytes_before},
            {"bytes_after", outcome.bytes_after},
            {"substitution_count", outcome.substitution_count},
            {"skip_reason", outcome.skip_reason ? json(to_string(*outcome.skip_reason)) : json(nullptr)}};
}

json to_json(const FlowRecord& record) {
    return {{"flow_id", record.flow_id},
            {"config_generation", record.config_generation},
            {"request", to_json(record.request)},
            {"outcome", to_json(record.outcome)},
            {"transform", record.transform ? to_json(*record.transform) : json(nullptr)},
            {"mock_served", record.mock_served},
            {"tunneled", record.tunneled},
            {"upstream_status", opt(record.upstream_status)},
            {"client_status", record.client_status},
            {"detection_report_ids", record.detection_report_ids},
            {"started_at", stamp(record.started_at)},
            {"completed_at", stamp(record.completed_at)},
            {"error", record.error ? json(to_string(*record.error)) : json(nullptr)},
            {"error_detail", record.error_detail}};
}

}  // namespace clawtrap
