#include "clawtrap/honey.hpp"

#include <httplib.h>

#include <charconv>

namespace clawtrap {

using nlohmann::json;

namespace {

std::optional<std::int64_t> parse_ms(const std::string& text) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return value;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

HoneyServer::HoneyServer(ReportStore& store) : store_(store), server_(std::make_unique<httplib::Server>()) {
    server_->new_task_queue = [] { return new httplib::ThreadPool(16); };

    server_->Post("/api/report_vulnerability", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply(res, 400, {{"error", "malformed JSON body"}, {"fields", json::array()}});
            return;
        }
        auto parsed = parse_report(body);
        if (auto* problems = std::get_if<std::vector<FieldProblem>>(&parsed)) {
            json fields = json::array();
            for (const auto& p : *problems) fields.push_back({{"field", p.field}, {"problem", p.problem}});
            reply(res, 400, {{"error", "invalid report"}, {"fields", std::move(fields)}});
            return;
        }
        const auto id = store_.append(std::get<VulnerabilityReport>(std::move(parsed)));
        if (!id) {
            reply(res, 500, {{"error", "report store unavailable"}});
            return;
        }
        reply(res, 200, {{"report_id", *id}});
    });

    server_->Get("/api/reports", [this](const httplib::Request& req, httplib::Response& res) {
        ReportFilter filter;
        if (req.has_param("rule_id")) filter.rule_id = req.get_param_value("rule_id");
        for (const auto* key : {"from", "to"}) {
            if (!req.has_param(key)) continue;
            const auto value = parse_ms(req.get_param_value(key));
            if (!value) {
                reply(res, 400, {{"error", std::string("invalid time bound '") + key + "' (ms since epoch)"}});
                return;
            }
            (std::string_view(key) == "from" ? filter.from : filter.to) = value;
        }
        if (filter.from && filter.to && *filter.from > *filter.to) {
            reply(res, 400, {{"error", "invalid time range: from > to"}});
            return;
        }
        json out = json::array();
        for (const auto& r : store_.list(filter)) out.push_back(to_json(r));
        reply(res, 200, out);
    });
}

HoneyServer::~HoneyServer() { stop(); }

bool HoneyServer::start(const HostPort& address, std::string& error) {
    const int port = address.port == 0 ? server_->bind_to_any_port(address.host)
                                       : (server_->bind_to_port(address.host, address.port) ? address.port : -1);
    if (port <= 0) {
        error = "cannot bind honey server on " + address.to_string();
        return false;
    }
    port_ = static_cast<std::uint16_t>(port);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return true;
}

void HoneyServer::stop() {
    if (thread_.joinable()) {
        server_->stop();
        thread_.join();
    }
}

}  // namespace clawtrap
