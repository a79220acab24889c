#include "clawtrap/audit.hpp"

#include <algorithm>
#include <stdexcept>

namespace clawtrap {

using nlohmann::json;

std::string_view to_string(AuditKind kind) {
    switch (kind) {
        case AuditKind::flow_completed: return "flow-completed";
        case AuditKind::report_enqueued: return "report-enqueued";
        case AuditKind::report_dropped: return "report-dropped";
        case AuditKind::config_reloaded: return "config-reloaded";
        case AuditKind::mode_changed: return "mode-changed";
    }
    return "unknown";
}

std::optional<AuditKind> audit_kind_from_string(std::string_view text) {
    for (auto kind : {AuditKind::flow_completed, AuditKind::report_enqueued, AuditKind::report_dropped,
                      AuditKind::config_reloaded, AuditKind::mode_changed}) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

AuditLog::AuditLog(std::unique_ptr<AuditSink> sink, Clock& clock, Options options, std::vector<StoredEvent> history)
    : sink_(std::move(sink)), clock_(clock), options_(std::move(options)), history_(std::move(history)) {
    if (!history_.empty()) head_ = history_.back().seq;
}

namespace {

std::vector<StoredEvent> parse_events(const std::vector<std::string>& lines) {
    std::vector<StoredEvent> events;
    for (const auto& line : lines) {
        const auto doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) continue;
        const auto seq = doc.find("seq");
        const auto kind = doc.find("kind");
        if (seq == doc.end() || kind == doc.end() || !seq->is_number_unsigned() || !kind->is_string()) continue;
        const auto parsed_kind = audit_kind_from_string(kind->get<std::string>());
        if (!parsed_kind) continue;
        events.push_back({seq->get<std::uint64_t>(), *parsed_kind, line});
    }
    return events;
}

}  // namespace

std::vector<StoredEvent> read_audit_file(const std::filesystem::path& path) {
    return parse_events(read_complete_lines(path));
}

std::unique_ptr<AuditLog> AuditLog::open_file(const std::filesystem::path& path, Clock& clock, Options options) {
    auto lines = recover_line_file(path);
    auto sink = std::make_unique<DurableLineFile>(path);
    return std::make_unique<AuditLog>(std::move(sink), clock, std::move(options), parse_events(lines));
}

void AuditLog::append(AuditKind kind, json payload) {
    const auto at = clock_.now().wall_ms;
    std::lock_guard lock(mu_);
    pending_.push_back({kind, at, std::move(payload)});
    flush_locked();
}

void AuditLog::flush_locked() {
    bool appended = false;
    while (!pending_.empty()) {
        auto& next = pending_.front();
        const auto seq = head_ + 1;
        json line = {{"seq", seq}, {"kind", to_string(next.kind)}, {"at", next.at}, {"payload", next.payload}};
        auto text = line.dump(-1, ' ', false, json::error_handler_t::replace);
        if (!sink_->append(text)) break;
        head_ = seq;
        history_.push_back({seq, next.kind, std::move(text)});
        pending_.pop_front();
        appended = true;
        if (options_.after_durable_append) options_.after_durable_append(seq);
    }
    while (pending_.size() > options_.max_buffered) {
        pending_.pop_front();
        ++dropped_;
    }
    if (appended) cv_.notify_all();
}

std::vector<StoredEvent> AuditLog::events_after(std::uint64_t since) const {
    std::lock_guard lock(mu_);
    std::vector<StoredEvent> out;
    // history_ is sorted by seq; seqs of a reopened file may not start at 1.
    auto it = std::upper_bound(history_.begin(), history_.end(), since,
                               [](std::uint64_t s, const StoredEvent& e) { return s < e.seq; });
    out.assign(it, history_.end());
    return out;
}

std::vector<StoredEvent> AuditLog::wait_events_after(std::uint64_t since, std::chrono::milliseconds timeout) const {
    {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return closed_ || head_ > since; });
    }
    return events_after(since);
}

std::uint64_t AuditLog::head() const {
    std::lock_guard lock(mu_);
    return head_;
}

std::uint64_t AuditLog::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

std::size_t AuditLog::buffered() const {
    std::lock_guard lock(mu_);
    return pending_.size();
}

void AuditLog::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

bool AuditLog::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

}  // namespace clawtrap
