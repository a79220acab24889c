#include "clawtrap/pipeline.hpp"

namespace clawtrap {

using nlohmann::json;

ResolvedTarget resolve_target(const GlobalConfig& config, const std::string& host, std::uint16_t port,
                              bool use_dns, const Resolver& dns) {
    ResolvedTarget target;
    target.connect_port = port;
    if (const auto it = config.resolve.find(host); it != config.resolve.end()) {
        if (auto hp = parse_host_port(it->second)) {
            target.destination_ip = IpAddress::parse(hp->host);
            target.connect_port = hp->port;
        } else {
            target.destination_ip = IpAddress::parse(it->second);
        }
        return target;
    }
    if (auto literal = IpAddress::parse(host)) {
        target.destination_ip = *literal;
        return target;
    }
    if (use_dns) {
        const auto addrs = dns(host);
        if (addrs.empty()) {
            target.dns_failed = true;
        } else {
            target.destination_ip = addrs.front();
        }
    }
    return target;
}

FlowPipeline::FlowPipeline(SharedRuntimeState& state, Upstream& upstream, ReportSink* reports, AuditLog* audit,
                           Clock& clock, Resolver dns, std::uint64_t first_flow_id)
    : state_(state),
      upstream_(upstream),
      reports_(reports),
      audit_(audit),
      clock_(clock),
      dns_(std::move(dns)),
      next_flow_id_(first_flow_id == 0 ? 1 : first_flow_id) {}

FlowRecord FlowPipeline::open_record(RequestSummary summary) {
    FlowRecord record;
    record.flow_id = next_flow_id_.fetch_add(1);
    record.config_generation = state_.snapshot()->generation;
    record.started_at = clock_.now();
    if (summary.received_at == Timestamp{}) summary.received_at = record.started_at;
    record.request = std::move(summary);
    return record;
}

void FlowPipeline::close_record(FlowRecord& record) {
    record.completed_at = clock_.now();
    if (record.completed_at.mono_ns < record.started_at.mono_ns) record.completed_at = record.started_at;
    if (audit_) audit_->append(AuditKind::flow_completed, to_json(record));
}

ResponseEnvelope FlowPipeline::error_response(FlowRecord& record, FlowError error, const std::string& detail) {
    const int status = error == FlowError::upstream_timeout ? 504
                       : error == FlowError::bad_request    ? 400
                       : error == FlowError::internal       ? 500
                                                            : 502;
    record.error = error;
    record.error_detail = detail;
    ResponseEnvelope response;
    response.status = status;
    response.reason = std::string(reason_phrase(status));
    response.body = "clawtrap: " + std::string(to_string(error)) + (detail.empty() ? "" : ": " + detail) + "\n";
    response.headers = {{"Content-Type", "text/plain; charset=utf-8"},
                        {"Content-Length", std::to_string(response.body.size())}};
    return response;
}

FlowResult FlowPipeline::handle_flow(FlowInput input) {
    // One snapshot for the whole flow: rules, snippets and the kill switch all come from it.
    const auto snap = state_.snapshot();
    const GlobalConfig& config = *snap->config;

    FlowResult result;
    FlowRecord& record = result.record;
    record.flow_id = next_flow_id_.fetch_add(1);
    record.config_generation = snap->generation;
    record.started_at = clock_.now();

    RequestSummary& req = input.summary;
    if (req.received_at == Timestamp{}) req.received_at = record.started_at;
    std::optional<IpAddress> connect_ip;
    std::uint16_t connect_port = req.port;
    if (!req.destination_ip) {
        const bool need_dns = !snap->force_off && snap->rules->uses_destination_ip();
        const auto target = resolve_target(config, req.host, req.port, need_dns, dns_);
        req.destination_ip = target.destination_ip;
        connect_ip = target.destination_ip;
        connect_port = target.connect_port;
    } else {
        connect_ip = req.destination_ip;
    }

    // 1. decide
    if (!snap->force_off) record.outcome = match_request(req, *snap->rules);
    const MatchOutcome& outcome = record.outcome;

    // 2. detections are queued, never awaited
    for (const auto& id : outcome.detections) {
        const CompiledRule* rule = snap->rules->find(id);
        VulnerabilityReport report;
        report.flow_id = record.flow_id;
        report.rule_id = id;
        if (rule) report.category = std::get<DetectAction>(rule->rule.action).category;
        report.request_excerpt = {req.method, req.host, req.path};
        if (req.destination_ip) report.destination_ip = req.destination_ip->to_string();
        report.observed_at = record.started_at.wall_ms;
        if (reports_) record.detection_report_ids.push_back(reports_->enqueue(std::move(report)));
    }

    const bool head_request = req.method == "HEAD";
    ResponseEnvelope& response = result.response;

    if (outcome.mock) {
        // 3. mock short-circuit: no upstream activity at all
        const CompiledRule* rule = snap->rules->find(*outcome.mock);
        const auto& action = std::get<MockAction>(rule->rule.action);
        const auto snippet = snap->snippets->find(action.snippet);
        if (snippet == snap->snippets->end()) {
            response = error_response(record, FlowError::internal, "snippet missing: " + action.snippet);
        } else {
            response = make_mock_response(action, snippet->second);
            record.mock_served = true;
        }
    } else {
        // 4. forward
        UpstreamRequest up;
        up.scheme = req.scheme;
        up.host = req.host;
        up.port = connect_port;
        up.connect_ip = connect_ip;
        up.method = req.method;
        up.target = input.target.empty() ? req.path : input.target;
        up.headers = req.headers;
        up.body = std::move(input.body);
        if (outcome.transform) remove_header(up.headers, "Accept-Encoding");
        auto fetched = upstream_.fetch(up);
        if (!fetched.response) {
            response = error_response(record, fetched.error.value_or(FlowError::internal), fetched.detail);
        } else {
            response = std::move(*fetched.response);
            record.upstream_status = response.status;
            // 5. transform
            if (outcome.transform && !head_request) {
                const CompiledRule* rule = snap->rules->find(*outcome.transform);
                auto transformed =
                    apply_attack(std::move(response), *rule, *snap->snippets, config.limits.body_cap_bytes);
                response = std::move(transformed.response);
                record.transform = transformed.outcome;
            }
            normalize_framing(response, head_request);
        }
    }
    // A HEAD response never carries a body, whatever the source produced.
    if (head_request) response.body.clear();

    // 6. record, then hand back for delivery
    record.client_status = response.status;
    record.request = std::move(req);
    close_record(record);
    return result;
}

std::uint64_t max_recorded_flow_id(const AuditLog& audit) {
    std::uint64_t max_id = 0;
    for (const auto& event : audit.events_after(0)) {
        if (event.kind != AuditKind::flow_completed) continue;
        const auto doc = json::parse(event.line, nullptr, false);
        if (doc.is_discarded()) continue;
        const auto* id = doc.contains("payload") ? &doc["payload"] : nullptr;
        if (id && id->contains("flow_id") && (*id)["flow_id"].is_number_unsigned()) {
            max_id = std::max(max_id, (*id)["flow_id"].get<std::uint64_t>());
        }
    }
    return max_id;
}

}  // namespace clawtrap
