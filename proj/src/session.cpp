#include "clawtrap/session.hpp"

#include "clawtrap/audit.hpp"
#include "clawtrap/clock.hpp"
#include "clawtrap/codec.hpp"
#include "clawtrap/pipeline.hpp"
#include "clawtrap/runtime_state.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace clawtrap {

using nlohmann::json;

namespace {

constexpr FlowError kAllErrors[] = {FlowError::bad_request,       FlowError::upstream_refused,
                                    FlowError::upstream_timeout,  FlowError::dns_failure,
                                    FlowError::upstream_tls,      FlowError::upstream_protocol,
                                    FlowError::response_too_large, FlowError::tls_handshake,
                                    FlowError::internal};

json headers_to_json(const HeaderList& headers) {
    json out = json::array();
    for (const auto& [k, v] : headers) out.push_back(json::array({k, v}));
    return out;
}

HeaderList headers_from_json(const json& doc) {
    HeaderList out;
    for (const auto& h : doc) {
        if (!h.is_array() || h.size() != 2 || !h[0].is_string() || !h[1].is_string()) {
            throw std::invalid_argument("headers must be [name, value] string pairs");
        }
        out.emplace_back(h[0].get<std::string>(), h[1].get<std::string>());
    }
    return out;
}

std::string body_from_json(const json& obj) {
    if (!obj.contains("body_b64")) return {};
    auto decoded = base64_decode(obj.at("body_b64").get<std::string>());
    if (!decoded) throw std::invalid_argument("body_b64 is not valid base64");
    return *decoded;
}

SessionEntry entry_from_json(const json& doc) {
    SessionEntry entry;
    const auto& req = doc.at("request");
    entry.request.method = req.at("method").get<std::string>();
    const auto scheme = req.value("scheme", std::string("http"));
    if (scheme != "http" && scheme != "https") throw std::invalid_argument("scheme must be http or https");
    entry.request.scheme = scheme == "https" ? Scheme::https : Scheme::http;
    entry.request.host = normalize_host(req.at("host").get<std::string>());
    entry.request.port = req.value("port", static_cast<std::uint16_t>(entry.request.scheme == Scheme::https ? 443 : 80));
    entry.request.path = req.value("path", std::string("/"));
    if (entry.request.path.empty() || entry.request.path.front() != '/') {
        throw std::invalid_argument("path must start with '/'");
    }
    if (req.contains("destination_ip") && !req["destination_ip"].is_null()) {
        entry.request.destination_ip = IpAddress::parse(req["destination_ip"].get<std::string>());
        if (!entry.request.destination_ip) throw std::invalid_argument("destination_ip is not an IP address");
    }
    if (req.contains("headers")) entry.request.headers = headers_from_json(req["headers"]);
    entry.request_body = body_from_json(req);

    if (doc.contains("response") && !doc["response"].is_null()) {
        const auto& res = doc["response"];
        ResponseEnvelope response;
        response.status = res.at("status").get<int>();
        response.reason = res.value("reason", std::string());
        if (res.contains("headers")) response.headers = headers_from_json(res["headers"]);
        response.body = body_from_json(res);
        entry.response = std::move(response);
    } else if (doc.contains("upstream_error")) {
        entry.upstream_error = flow_error_from_string(doc["upstream_error"].get<std::string>());
        if (!entry.upstream_error) throw std::invalid_argument("unknown upstream_error");
    } else {
        throw std::invalid_argument("entry needs a response or an upstream_error");
    }
    return entry;
}

json request_to_json(const SessionEntry& entry) {
    const auto& r = entry.request;
    json out = {{"method", r.method},
                {"scheme", to_string(r.scheme)},
                {"host", r.host},
                {"port", r.port},
                {"path", r.path},
                {"headers", headers_to_json(r.headers)},
                {"body_b64", base64_encode(entry.request_body)}};
    if (r.destination_ip) out["destination_ip"] = r.destination_ip->to_string();
    return out;
}

/// Serves the response recorded for the entry being replayed.
class RecordedUpstream final : public Upstream {
public:
    void set_current(const SessionEntry* entry) { current_ = entry; }
    UpstreamResult fetch(const UpstreamRequest&) override {
        UpstreamResult result;
        if (current_ && current_->response) {
            result.response = *current_->response;
        } else {
            result.error = current_ && current_->upstream_error ? *current_->upstream_error : FlowError::internal;
            result.detail = "recorded upstream failure";
        }
        return result;
    }

private:
    const SessionEntry* current_ = nullptr;
};

/// Hands out sequential tickets and audits them; nothing leaves the process.
class LocalReportSink final : public ReportSink {
public:
    explicit LocalReportSink(AuditLog& audit) : audit_(audit) {}
    std::uint64_t enqueue(VulnerabilityReport report) override {
        const auto ticket = next_++;
        audit_.append(AuditKind::report_enqueued,
                      {{"flow_id", report.flow_id}, {"rule_id", report.rule_id}, {"ticket", ticket}});
        return ticket;
    }

private:
    AuditLog& audit_;
    std::uint64_t next_ = 1;
};

}  // namespace

std::optional<FlowError> flow_error_from_string(std::string_view text) {
    for (const auto e : kAllErrors) {
        if (to_string(e) == text) return e;
    }
    return std::nullopt;
}

json response_to_json(const ResponseEnvelope& response) {
    return {{"status", response.status},
            {"reason", response.reason},
            {"headers", headers_to_json(response.headers)},
            {"body_b64", base64_encode(response.body)}};
}

RecordedSession parse_session(std::string_view text) {
    RecordedSession session;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        const auto doc = json::parse(line, nullptr, false);
        if (!doc.is_object()) throw SessionError("not a JSON object", line_no);
        const auto kind = doc.value("kind", std::string("entry"));
        try {
            if (kind == "meta") {
                session.metadata = doc;
                session.metadata.erase("kind");
            } else if (kind == "entry") {
                session.entries.push_back(entry_from_json(doc));
            } else {
                throw std::invalid_argument("unknown kind '" + kind + "'");
            }
        } catch (const SessionError&) {
            throw;
        } catch (const std::exception& e) {
            throw SessionError(e.what(), line_no);
        }
    }
    return session;
}

std::string serialize_session(const RecordedSession& session) {
    std::string out;
    json meta = session.metadata;
    meta["kind"] = "meta";
    out += meta.dump() + "\n";
    for (const auto& entry : session.entries) {
        json doc = {{"kind", "entry"}, {"request", request_to_json(entry)}};
        if (entry.response) {
            doc["response"] = response_to_json(*entry.response);
        } else {
            doc["upstream_error"] = to_string(entry.upstream_error.value_or(FlowError::internal));
        }
        out += doc.dump() + "\n";
    }
    return out;
}

RecordedSession load_session_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_session(buf.str());
}

ReplayOutput replay_session(const RecordedSession& session, const GlobalConfig& config, const SnippetMap& snippets) {
    ManualClock clock;
    auto sink = std::make_unique<MemoryLineSink>();
    auto* lines = sink.get();
    AuditLog audit(std::move(sink), clock);
    SharedRuntimeState state(config, snippets, &audit);
    RecordedUpstream upstream;
    LocalReportSink reports(audit);
    const Resolver no_dns = [](const std::string&) { return std::vector<IpAddress>{}; };
    FlowPipeline pipeline(state, upstream, &reports, &audit, clock, no_dns);

    ReplayOutput out;
    for (std::size_t i = 0; i < session.entries.size(); ++i) {
        const auto& entry = session.entries[i];
        clock.set(static_cast<std::int64_t>(i + 1));
        upstream.set_current(&entry);
        FlowInput input;
        input.summary = entry.request;
        input.summary.received_at = clock.now();
        input.target = entry.request.path;
        input.body = entry.request_body;
        auto result = pipeline.handle_flow(std::move(input));
        json line = {{"index", i + 1}, {"flow_id", result.record.flow_id}, {"response", response_to_json(result.response)}};
        out.response_lines.push_back(line.dump());
        out.responses.push_back(std::move(result.response));
    }
    out.audit_lines = lines->lines();
    return out;
}

}  // namespace clawtrap
