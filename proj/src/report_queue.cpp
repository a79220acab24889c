#include "clawtrap/report_queue.hpp"

#include <httplib.h>

namespace clawtrap {

using nlohmann::json;

ReportQueue::ReportQueue(Deliver deliver, AuditLog* audit, std::size_t capacity)
    : deliver_(std::move(deliver)), audit_(audit), capacity_(capacity == 0 ? 1 : capacity) {}

ReportQueue::~ReportQueue() { stop(std::chrono::milliseconds(0)); }

std::uint64_t ReportQueue::enqueue(VulnerabilityReport report) {
    json payload = {{"flow_id", report.flow_id}, {"rule_id", report.rule_id}};
    std::optional<Item> evicted;
    std::uint64_t ticket = 0;
    {
        std::lock_guard lock(mu_);
        ticket = next_ticket_++;
        if (items_.size() >= capacity_) {
            evicted = std::move(items_.front());
            items_.pop_front();
            ++dropped_;
        }
        items_.push_back({ticket, std::move(report)});
    }
    cv_.notify_one();
    if (audit_) {
        payload["ticket"] = ticket;
        audit_->append(AuditKind::report_enqueued, std::move(payload));
    }
    if (evicted) audit_drop(*evicted, "queue-overflow", "");
    return ticket;
}

void ReportQueue::audit_drop(const Item& item, std::string_view reason, const std::string& detail) {
    if (!audit_) return;
    json payload = {{"ticket", item.ticket},
                    {"flow_id", item.report.flow_id},
                    {"rule_id", item.report.rule_id},
                    {"reason", reason},
                    {"detail", detail}};
    audit_->append(AuditKind::report_dropped, std::move(payload));
}

void ReportQueue::start() {
    std::lock_guard lock(mu_);
    if (worker_.joinable()) return;
    stopping_ = false;
    worker_ = std::thread([this] { run(); });
}

void ReportQueue::stop(std::chrono::milliseconds drain_timeout) {
    {
        std::lock_guard lock(mu_);
        if (!worker_.joinable()) return;
        stopping_ = true;
        drain_deadline_ = std::chrono::steady_clock::now() + drain_timeout;
    }
    cv_.notify_all();
    worker_.join();
}

void ReportQueue::run() {
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [this] { return stopping_ || !items_.empty(); });
        if (items_.empty() || (stopping_ && std::chrono::steady_clock::now() >= drain_deadline_)) {
            if (stopping_) break;
            continue;
        }
        Item item = std::move(items_.front());
        items_.pop_front();
        in_flight_ = true;
        lock.unlock();

        DeliveryResult result = deliver_(item.report);
        if (!result.ok) result = deliver_(item.report);
        if (!result.ok) audit_drop(item, "delivery-failed", result.detail);

        lock.lock();
        in_flight_ = false;
        if (result.ok) {
            ++delivered_;
        } else {
            ++dropped_;
        }
        idle_cv_.notify_all();
    }
    idle_cv_.notify_all();
}

bool ReportQueue::wait_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return idle_cv_.wait_for(lock, timeout, [this] { return items_.empty() && !in_flight_; });
}

std::uint64_t ReportQueue::delivered() const {
    std::lock_guard lock(mu_);
    return delivered_;
}

std::uint64_t ReportQueue::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

std::size_t ReportQueue::pending() const {
    std::lock_guard lock(mu_);
    return items_.size() + (in_flight_ ? 1 : 0);
}

ReportQueue::Deliver ReportQueue::http_delivery(const HostPort& honey_address) {
    return [address = honey_address](const VulnerabilityReport& report) {
        DeliveryResult result;
        const bool v6 = address.host.find(':') != std::string::npos;
        httplib::Client client(v6 ? "[" + address.host + "]" : address.host, address.port);
        client.set_connection_timeout(std::chrono::seconds(2));
        client.set_read_timeout(std::chrono::seconds(5));
        client.set_write_timeout(std::chrono::seconds(5));
        auto body = to_json(report);
        body.erase("report_id");
        const auto res = client.Post("/api/report_vulnerability", body.dump(), "application/json");
        if (!res) {
            result.detail = httplib::to_string(res.error());
            return result;
        }
        if (res->status != 200) {
            result.detail = "honey server answered " + std::to_string(res->status);
            return result;
        }
        const auto ack = json::parse(res->body, nullptr, false);
        if (ack.is_object() && ack.contains("report_id") && ack["report_id"].is_number_unsigned()) {
            result.report_id = ack["report_id"].get<std::uint64_t>();
        }
        result.ok = true;
        return result;
    };
}

}  // namespace clawtrap
