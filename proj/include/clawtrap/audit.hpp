#pragma once

#include "clawtrap/clock.hpp"
#include "clawtrap/line_file.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

enum class AuditKind { flow_completed, report_enqueued, report_dropped, config_reloaded, mode_changed };

std::string_view to_string(AuditKind kind);
std::optional<AuditKind> audit_kind_from_string(std::string_view text);

/// An event as persisted: one JSON object per line with seq, kind, at and payload.
struct StoredEvent {
    std::uint64_t seq = 0;
    AuditKind kind = AuditKind::flow_completed;
    std::string line;
};

using AuditSink = LineSink;

/// Single-writer event log. Sequence numbers are assigned at the moment an event reaches
/// the sink, so the persisted sequence is gapless. When the sink fails, events wait in a
/// bounded buffer and the oldest are dropped (and counted) once it is full.
struct AuditOptions {
    std::size_t max_buffered = 4096;
    // Test hook run after an event is durable and before subscribers are woken.
    std::function<void(std::uint64_t seq)> after_durable_append;
};

class AuditLog {
public:
    using Options = AuditOptions;

    AuditLog(std::unique_ptr<AuditSink> sink, Clock& clock, Options options,
             std::vector<StoredEvent> history = {});
    AuditLog(std::unique_ptr<AuditSink> sink, Clock& clock) : AuditLog(std::move(sink), clock, Options{}) {}

    /// Reopens an existing file (continuing its sequence) or creates it. A torn final line is
    /// truncated away. Throws std::runtime_error when the file cannot be opened.
    static std::unique_ptr<AuditLog> open_file(const std::filesystem::path& path, Clock& clock,
                                               Options options = {});

    void append(AuditKind kind, nlohmann::json payload);

    std::vector<StoredEvent> events_after(std::uint64_t since) const;
    /// Blocks until an event with seq > since exists, the timeout passes, or close() is called.
    std::vector<StoredEvent> wait_events_after(std::uint64_t since, std::chrono::milliseconds timeout) const;

    std::uint64_t head() const;
    std::uint64_t dropped() const;
    std::size_t buffered() const;

    /// Wakes all waiters; later waits return immediately.
    void close();
    bool closed() const;

private:
    struct Pending {
        AuditKind kind;
        std::int64_t at;
        nlohmann::json payload;
    };

    void flush_locked();

    std::unique_ptr<AuditSink> sink_;
    Clock& clock_;
    Options options_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<StoredEvent> history_;
    std::deque<Pending> pending_;
    std::uint64_t head_ = 0;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

/// Reads the events of an audit file (skipping a torn final line).
std::vector<StoredEvent> read_audit_file(const std::filesystem::path& path);

}  // namespace clawtrap
