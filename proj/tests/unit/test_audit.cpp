#include "clawtrap/audit.hpp"

#include "temp_dir.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <thread>

using namespace clawtrap;
using namespace clawtrap::testing;
using nlohmann::json;

namespace {

std::vector<std::uint64_t> seqs(const std::vector<StoredEvent>& events) {
    std::vector<std::uint64_t> out;
    for (const auto& e : events) out.push_back(e.seq);
    return out;
}

}  // namespace

TEST_SUITE("audit") {
    TEST_CASE("events get gapless seqs and a stable line shape") {
        ManualClock clock;
        clock.set(1234);
        auto sink = std::make_unique<MemoryLineSink>();
        auto* raw = sink.get();
        AuditLog log(std::move(sink), clock);
        log.append(AuditKind::flow_completed, {{"flow_id", 1}});
        log.append(AuditKind::mode_changed, {{"target", "all"}});
        CHECK(log.head() == 2);
        const auto lines = raw->lines();
        REQUIRE(lines.size() == 2);
        const auto first = json::parse(lines[0]);
        CHECK(first["seq"] == 1);
        CHECK(first["kind"] == "flow-completed");
        CHECK(first["at"] == 1234);
        CHECK(first["payload"]["flow_id"] == 1);
        CHECK(json::parse(lines[1])["kind"] == "mode-changed");
        CHECK(seqs(log.events_after(0)) == std::vector<std::uint64_t>{1, 2});
        CHECK(seqs(log.events_after(1)) == std::vector<std::uint64_t>{2});
        CHECK(log.events_after(2).empty());
    }

    TEST_CASE("a failing sink buffers, drops the oldest, and resumes without gaps") {
        ManualClock clock;
        auto sink = std::make_unique<MemoryLineSink>();
        auto* raw = sink.get();
        AuditOptions options;
        options.max_buffered = 3;
        AuditLog log(std::move(sink), clock, options);
        log.append(AuditKind::flow_completed, {{"n", 0}});
        raw->set_failing(true);
        for (int i = 1; i <= 5; ++i) log.append(AuditKind::flow_completed, {{"n", i}});
        CHECK(log.head() == 1);
        CHECK(log.buffered() == 3);
        CHECK(log.dropped() == 2);
        raw->set_failing(false);
        log.append(AuditKind::flow_completed, {{"n", 6}});
        CHECK(log.buffered() == 0);
        const auto lines = raw->lines();
        REQUIRE(lines.size() == 5);
        std::vector<int> ns;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto doc = json::parse(lines[i]);
            CHECK(doc["seq"] == i + 1);
            ns.push_back(doc["payload"]["n"]);
        }
        CHECK(ns == std::vector<int>{0, 3, 4, 5, 6});
    }

    TEST_CASE("waiters wake on append and on close") {
        ManualClock clock;
        AuditLog log(std::make_unique<MemoryLineSink>(), clock);
        std::vector<StoredEvent> got;
        std::thread waiter([&] { got = log.wait_events_after(0, std::chrono::seconds(10)); });
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        log.append(AuditKind::flow_completed, {});
        waiter.join();
        CHECK(seqs(got) == std::vector<std::uint64_t>{1});

        const auto start = std::chrono::steady_clock::now();
        std::thread closer([&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            log.close();
        });
        CHECK(log.wait_events_after(1, std::chrono::seconds(10)).empty());
        closer.join();
        CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
        CHECK(log.closed());
    }

    TEST_CASE("reopening a file continues the sequence and cuts a torn tail") {
        TempDir dir;
        const auto path = dir / "audit.jsonl";
        SystemClock clock;
        {
            auto log = AuditLog::open_file(path, clock);
            log->append(AuditKind::flow_completed, {{"flow_id", 1}});
            log->append(AuditKind::flow_completed, {{"flow_id", 2}});
        }
        {
            std::ofstream out(path, std::ios::app | std::ios::binary);
            out << R"({"seq":3,"kind":"flow-comp)";
        }
        CHECK(read_audit_file(path).size() == 2);
        auto log = AuditLog::open_file(path, clock);
        CHECK(log->head() == 2);
        log->append(AuditKind::config_reloaded, {});
        const auto events = read_audit_file(path);
        CHECK(seqs(events) == std::vector<std::uint64_t>{1, 2, 3});
        CHECK(events.back().kind == AuditKind::config_reloaded);
        const auto text = read_file(path);
        CHECK(text.back() == '\n');
        CHECK(text.find("flow-comp\"") == std::string::npos);
        CHECK(seqs(log->events_after(1)) == std::vector<std::uint64_t>{2, 3});
    }

    TEST_CASE("a crash after the durable write leaves the event exactly once") {
        TempDir dir;
        const auto path = dir / "audit.jsonl";
        const pid_t pid = ::fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            SystemClock clock;
            AuditOptions options;
            options.after_durable_append = [](std::uint64_t) { ::_exit(42); };
            auto log = AuditLog::open_file(path, clock, options);
            log->append(AuditKind::flow_completed, {{"flow_id", 7}});
            ::_exit(0);
        }
        int status = 0;
        ::waitpid(pid, &status, 0);
        REQUIRE(WIFEXITED(status));
        REQUIRE(WEXITSTATUS(status) == 42);

        SystemClock clock;
        auto log = AuditLog::open_file(path, clock);
        const auto events = log->events_after(0);
        REQUIRE(events.size() == 1);
        CHECK(json::parse(events[0].line)["payload"]["flow_id"] == 7);
        log->append(AuditKind::flow_completed, {{"flow_id", 8}});
        CHECK(seqs(read_audit_file(path)) == std::vector<std::uint64_t>{1, 2});
    }

    TEST_CASE("concurrent appenders produce a gapless sequence") {
        ManualClock clock;
        auto sink = std::make_unique<MemoryLineSink>();
        auto* raw = sink.get();
        AuditLog log(std::move(sink), clock);
        std::vector<std::thread> threads;
        for (int t = 0; t < 8; ++t) {
            threads.emplace_back([&, t] {
                for (int i = 0; i < 100; ++i) log.append(AuditKind::flow_completed, {{"t", t}, {"i", i}});
            });
        }
        for (auto& t : threads) t.join();
        const auto lines = raw->lines();
        REQUIRE(lines.size() == 800);
        for (std::size_t i = 0; i < lines.size(); ++i) CHECK(json::parse(lines[i])["seq"] == i + 1);
    }

    TEST_CASE("kind names round trip") {
        for (auto kind : {AuditKind::flow_completed, AuditKind::report_enqueued, AuditKind::report_dropped,
                          AuditKind::config_reloaded, AuditKind::mode_changed}) {
            CHECK(audit_kind_from_string(to_string(kind)) == kind);
        }
        CHECK_FALSE(audit_kind_from_string("nope"));
    }
}
