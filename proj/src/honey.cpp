#include "clawtrap/honey.hpp"

#include <algorithm>
#include <stdexcept>

namespace clawtrap {

using nlohmann::json;

json to_json(const VulnerabilityReport& report) {
    return {{"schema_version", report.schema_version},
            {"report_id", report.report_id},
            {"flow_id", report.flow_id},
            {"rule_id", report.rule_id},
            {"category", report.category},
            {"request_excerpt",
             {{"method", report.request_excerpt.method},
              {"host", report.request_excerpt.host},
              {"path", report.request_excerpt.path}}},
            {"destination_ip", report.destination_ip ? json(*report.destination_ip) : json(nullptr)},
            {"observed_at", report.observed_at}};
}

std::variant<VulnerabilityReport, std::vector<FieldProblem>> parse_report(const json& body) {
    std::vector<FieldProblem> problems;
    VulnerabilityReport report;
    if (!body.is_object()) return std::vector<FieldProblem>{{"", "body must be a JSON object"}};

    auto string_field = [&](const json& obj, const std::string& prefix, const char* key, std::string& out) {
        const auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) {
            problems.push_back({prefix + key, "missing"});
        } else if (!it->is_string() || it->get<std::string>().empty()) {
            problems.push_back({prefix + key, "must be a non-empty string"});
        } else {
            out = it->get<std::string>();
        }
    };

    if (const auto it = body.find("schema_version"); it != body.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() != kReportSchemaVersion) {
            problems.push_back({"schema_version", "unsupported (expected " + std::to_string(kReportSchemaVersion) + ")"});
        }
    }
    if (const auto it = body.find("flow_id"); it == body.end()) {
        problems.push_back({"flow_id", "missing"});
    } else if (!it->is_number_unsigned()) {
        problems.push_back({"flow_id", "must be a non-negative integer"});
    } else {
        report.flow_id = it->get<std::uint64_t>();
    }
    string_field(body, "", "rule_id", report.rule_id);
    string_field(body, "", "category", report.category);
    if (const auto it = body.find("request_excerpt"); it == body.end()) {
        problems.push_back({"request_excerpt", "missing"});
    } else if (!it->is_object()) {
        problems.push_back({"request_excerpt", "must be an object"});
    } else {
        string_field(*it, "request_excerpt.", "method", report.request_excerpt.method);
        string_field(*it, "request_excerpt.", "host", report.request_excerpt.host);
        string_field(*it, "request_excerpt.", "path", report.request_excerpt.path);
    }
    if (const auto it = body.find("destination_ip"); it != body.end() && !it->is_null()) {
        if (!it->is_string() || !IpAddress::parse(it->get<std::string>())) {
            problems.push_back({"destination_ip", "must be an IP address"});
        } else {
            report.destination_ip = it->get<std::string>();
        }
    }
    if (const auto it = body.find("observed_at"); it == body.end()) {
        problems.push_back({"observed_at", "missing"});
    } else if (!it->is_number_integer()) {
        problems.push_back({"observed_at", "must be an integer (ms since epoch)"});
    } else {
        report.observed_at = it->get<std::int64_t>();
    }
    if (!problems.empty()) return problems;
    return report;
}

namespace {

std::optional<VulnerabilityReport> from_stored(const std::string& line) {
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    auto parsed = parse_report(doc);
    auto* report = std::get_if<VulnerabilityReport>(&parsed);
    const auto id = doc.find("report_id");
    if (!report || id == doc.end() || !id->is_number_unsigned()) return std::nullopt;
    report->report_id = id->get<std::uint64_t>();
    return *report;
}

}  // namespace

ReportStore::ReportStore(std::unique_ptr<LineSink> sink, std::vector<VulnerabilityReport> existing)
    : sink_(std::move(sink)), reports_(std::move(existing)) {
    for (const auto& r : reports_) last_id_ = std::max(last_id_, r.report_id);
}

std::unique_ptr<ReportStore> ReportStore::open(const std::filesystem::path& path) {
    std::vector<VulnerabilityReport> existing;
    for (const auto& line : recover_line_file(path)) {
        if (auto report = from_stored(line)) existing.push_back(std::move(*report));
    }
    return std::make_unique<ReportStore>(std::make_unique<DurableLineFile>(path), std::move(existing));
}

std::optional<std::uint64_t> ReportStore::append(VulnerabilityReport report) {
    std::lock_guard lock(append_mu_);
    report.report_id = last_id_ + 1;
    if (!sink_->append(to_json(report).dump())) return std::nullopt;
    last_id_ = report.report_id;
    std::unique_lock write(read_mu_);
    reports_.push_back(std::move(report));
    return last_id_;
}

std::vector<VulnerabilityReport> ReportStore::list(const ReportFilter& filter) const {
    std::shared_lock read(read_mu_);
    std::vector<VulnerabilityReport> out;
    for (const auto& r : reports_) {
        if (filter.rule_id && r.rule_id != *filter.rule_id) continue;
        if (filter.from && r.observed_at < *filter.from) continue;
        if (filter.to && r.observed_at > *filter.to) continue;
        out.push_back(r);
    }
    return out;
}

std::size_t ReportStore::size() const {
    std::shared_lock read(read_mu_);
    return reports_.size();
}

}  // namespace clawtrap
