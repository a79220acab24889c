#pragma once

#include "clawtrap/audit.hpp"
#include "clawtrap/honey.hpp"
#include "clawtrap/net.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace clawtrap {

/// Where the pipeline hands detection reports. Must never block the caller.
class ReportSink {
public:
    virtual ~ReportSink() = default;
    /// Returns a local ticket id for the report.
    virtual std::uint64_t enqueue(VulnerabilityReport report) = 0;
};

struct DeliveryResult {
    bool ok = false;
    std::optional<std::uint64_t> report_id;
    std::string detail;
};

/// Bounded multi-producer queue with one consumer thread delivering to the honey server.
/// On overflow the oldest report is dropped. A failed delivery is retried once and then
/// dropped. Enqueues and drops are audited.
class ReportQueue final : public ReportSink {
public:
    using Deliver = std::function<DeliveryResult(const VulnerabilityReport&)>;

    ReportQueue(Deliver deliver, AuditLog* audit, std::size_t capacity = 1024);
    ~ReportQueue() override;
    ReportQueue(const ReportQueue&) = delete;
    ReportQueue& operator=(const ReportQueue&) = delete;

    std::uint64_t enqueue(VulnerabilityReport report) override;

    void start();
    /// Delivers what is queued (bounded by `drain_timeout`) and stops the consumer.
    void stop(std::chrono::milliseconds drain_timeout = std::chrono::seconds(5));
    /// True once the queue is empty and nothing is in flight.
    bool wait_idle(std::chrono::milliseconds timeout);

    std::uint64_t delivered() const;
    std::uint64_t dropped() const;
    std::size_t pending() const;

    /// POSTs to http://address/api/report_vulnerability.
    static Deliver http_delivery(const HostPort& honey_address);

private:
    struct Item {
        std::uint64_t ticket;
        VulnerabilityReport report;
    };

    void run();
    void audit_drop(const Item& item, std::string_view reason, const std::string& detail);

    Deliver deliver_;
    AuditLog* audit_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<Item> items_;
    std::uint64_t next_ticket_ = 1;
    std::uint64_t delivered_ = 0;
    std::uint64_t dropped_ = 0;
    bool in_flight_ = false;
    bool stopping_ = false;
    std::chrono::steady_clock::time_point drain_deadline_{};
    std::thread worker_;
};

}  // namespace clawtrap
