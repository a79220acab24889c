#pragma once

#include "clawtrap/line_file.hpp"
#include "clawtrap/net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace httplib {
class Server;
}

namespace clawtrap {

inline constexpr int kReportSchemaVersion = 1;

struct RequestExcerpt {
    std::string method;
    std::string host;
    std::string path;

    bool operator==(const RequestExcerpt&) const = default;
};

struct VulnerabilityReport {
    int schema_version = kReportSchemaVersion;
    std::uint64_t report_id = 0;  // assigned by the store
    std::uint64_t flow_id = 0;
    std::string rule_id;
    std::string category;
    RequestExcerpt request_excerpt;
    std::optional<std::string> destination_ip;
    std::int64_t observed_at = 0;  // ms since epoch

    bool operator==(const VulnerabilityReport&) const = default;
};

nlohmann::json to_json(const VulnerabilityReport& report);

struct FieldProblem {
    std::string field;
    std::string problem;
};

/// Validates a posted report body. Any client-supplied report_id is ignored.
std::variant<VulnerabilityReport, std::vector<FieldProblem>> parse_report(const nlohmann::json& body);

struct ReportFilter {
    std::optional<std::string> rule_id;
    std::optional<std::int64_t> from;  // inclusive, ms
    std::optional<std::int64_t> to;    // inclusive, ms
};

/// Append-only report log, one JSON object per line. Ids are assigned in append order and
/// never reused; a report is on disk before its id is returned.
class ReportStore {
public:
    ReportStore(std::unique_ptr<LineSink> sink, std::vector<VulnerabilityReport> existing = {});

    /// Throws std::runtime_error when the file cannot be opened.
    static std::unique_ptr<ReportStore> open(const std::filesystem::path& path);

    /// Assigns the next id and persists. nullopt when the sink refuses the write.
    std::optional<std::uint64_t> append(VulnerabilityReport report);
    std::vector<VulnerabilityReport> list(const ReportFilter& filter = {}) const;
    std::size_t size() const;

private:
    std::unique_ptr<LineSink> sink_;
    std::mutex append_mu_;
    mutable std::shared_mutex read_mu_;
    std::vector<VulnerabilityReport> reports_;
    std::uint64_t last_id_ = 0;
};

/// HTTP front of the report store:
///   POST /api/report_vulnerability  -> 200 {"report_id": n} | 400 | 500
///   GET  /api/reports?rule_id=&from=&to=  -> 200 [reports] | 400
class HoneyServer {
public:
    explicit HoneyServer(ReportStore& store);
    ~HoneyServer();
    HoneyServer(const HoneyServer&) = delete;
    HoneyServer& operator=(const HoneyServer&) = delete;

    /// Binds and starts serving in the background. Port 0 picks an ephemeral port.
    bool start(const HostPort& address, std::string& error);
    std::uint16_t port() const { return port_; }
    void stop();

private:
    ReportStore& store_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::uint16_t port_ = 0;
};

}  // namespace clawtrap
