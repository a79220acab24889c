#include "clawtrap/control_server.hpp"

#include <httplib.h>

#include <charconv>

namespace clawtrap {

using nlohmann::json;

std::string format_sse_event(const StoredEvent& event) {
    std::string out;
    out.reserve(event.line.size() + 64);
    out.append("id: ").append(std::to_string(event.seq)).append("\n");
    out.append("event: ").append(to_string(event.kind)).append("\n");
    out.append("data: ").append(event.line).append("\n\n");
    return out;
}

std::optional<std::uint64_t> parse_since_seq(std::string_view text) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

ControlServer::ControlServer(SharedRuntimeState& state, AuditLog& audit, ReportQueue* reports)
    : ControlServer(state, audit, reports, Options{}) {}

ControlServer::ControlServer(SharedRuntimeState& state, AuditLog& audit, ReportQueue* reports, Options options)
    : state_(state), audit_(audit), reports_(reports), options_(options), server_(std::make_unique<httplib::Server>()) {
    server_->new_task_queue = [] { return new httplib::ThreadPool(64); };
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    install_routes();
}

ControlServer::~ControlServer() { stop(); }

void ControlServer::install_routes() {
    server_->Get("/api/flows/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::uint64_t> since = 0;
        if (req.has_param("since_seq")) {
            since = parse_since_seq(req.get_param_value("since_seq"));
        } else if (req.has_header("Last-Event-ID")) {
            since = parse_since_seq(req.get_header_value("Last-Event-ID"));
        }
        if (!since) {
            reply(res, 400, {{"error", "since_seq must be a non-negative integer"}});
            return;
        }
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::uint64_t>(*since);
        auto started = std::make_shared<bool>(false);
        res.set_chunked_content_provider(
            "text/event-stream", [this, cursor, started](std::size_t, httplib::DataSink& sink) {
                if (!*started) {
                    *started = true;
                    const auto head = audit_.head();
                    if (*cursor > head) {
                        const json gap = {{"requested", *cursor}, {"head", head}};
                        const std::string frame = "event: gap\ndata: " + gap.dump() + "\n\n";
                        if (!sink.write(frame.data(), frame.size())) return false;
                        *cursor = head;
                    }
                }
                if (stopping_ || audit_.closed()) {
                    sink.done();
                    return true;
                }
                // Wait in short slices so stop() is not held up by an idle subscriber.
                std::vector<StoredEvent> events;
                const auto deadline = std::chrono::steady_clock::now() + options_.heartbeat;
                while (events.empty() && !stopping_ && std::chrono::steady_clock::now() < deadline) {
                    events = audit_.wait_events_after(*cursor, std::chrono::milliseconds(200));
                }
                if (events.empty()) {
                    if (stopping_ || audit_.closed()) {
                        sink.done();
                        return true;
                    }
                    static constexpr char kHeartbeat[] = ": heartbeat\n\n";
                    return sink.write(kHeartbeat, sizeof kHeartbeat - 1);
                }
                std::string frames;
                for (const auto& event : events) frames += format_sse_event(event);
                if (!sink.write(frames.data(), frames.size())) return false;
                *cursor = events.back().seq;
                return true;
            });
    });

    server_->Get("/api/status", [this](const httplib::Request&, httplib::Response& res) {
        const auto snap = state_.snapshot();
        const auto& config = *snap->config;
        json body = {
            {"uptime_ms", std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                                 started_)
                              .count()},
            {"generation", snap->generation},
            {"version", snap->version},
            {"force_off", snap->force_off},
            {"rule_count", snap->rules->size()},
            {"addresses", options_.addresses ? options_.addresses()
                                             : json{{"listen", config.listen_address.to_string()},
                                                    {"control", config.control_address.to_string()},
                                                    {"honey", config.honey_address.to_string()}}},
            {"audit", {{"head_seq", audit_.head()}, {"dropped", audit_.dropped()}, {"buffered", audit_.buffered()}}},
        };
        if (reports_) {
            body["reports"] = {
                {"pending", reports_->pending()}, {"delivered", reports_->delivered()}, {"dropped", reports_->dropped()}};
        }
        reply(res, 200, body);
    });

    server_->Post("/api/mode", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("target") || !body["target"].is_string() ||
            !body.contains("enabled") || !body["enabled"].is_boolean()) {
            reply(res, 400, {{"error", "expected {\"target\": string, \"enabled\": boolean}"}});
            return;
        }
        const auto target = body["target"].get<std::string>();
        if (state_.set_mode(target, body["enabled"].get<bool>()) == SharedRuntimeState::ModeStatus::unknown_rule) {
            reply(res, 404, {{"error", "unknown rule: " + target}});
            return;
        }
        reply(res, 200, state_.describe());
    });

    server_->Post("/api/rules/reload", [this](const httplib::Request& req, httplib::Response& res) {
        const auto report = state_.reload(req.body);
        res.status = report.ok() ? 200 : 422;
        auto body = json::parse(report.to_json());
        body["accepted"] = report.ok();
        body["generation"] = state_.snapshot()->generation;
        res.set_content(body.dump(), "application/json");
    });

    server_->Get("/api/rules", [this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, state_.describe());
    });
}

bool ControlServer::start(const HostPort& address, std::string& error) {
    const int port = address.port == 0 ? server_->bind_to_any_port(address.host)
                                       : (server_->bind_to_port(address.host, address.port) ? address.port : -1);
    if (port <= 0) {
        error = "cannot bind control server on " + address.to_string();
        return false;
    }
    port_ = static_cast<std::uint16_t>(port);
    stopping_ = false;
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return true;
}

void ControlServer::stop() {
    if (!thread_.joinable()) return;
    stopping_ = true;
    server_->stop();
    thread_.join();
}

}  // namespace clawtrap
