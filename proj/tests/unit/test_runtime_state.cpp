#include "clawtrap/runtime_state.hpp"

#include "fixtures.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <atomic>
#include <thread>

using namespace clawtrap;
using namespace clawtrap::testing;
using nlohmann::json;

namespace {

struct Fixture {
    TempDir dir;
    ManualClock clock;
    MemoryLineSink* sink = nullptr;
    std::unique_ptr<AuditLog> audit;
    GlobalConfig config;

    Fixture() {
        write_file(dir / "snippets/warn.html", "<b>W</b>");
        write_file(dir / "snippets/fake.html", "<p>fake</p>");
        config = base_config((dir / "snippets").string());
        config.audit_path = (dir / "audit.jsonl").string();
        config.report_store_path = (dir / "reports.jsonl").string();
        config.rules.mock.push_back(make_rule("m", host_spec("bbc.com"), MockAction{"fake"}));
        config.rules.transform.push_back(make_rule("t", host_spec("*"), inject_action("warn")));
        auto s = std::make_unique<MemoryLineSink>();
        sink = s.get();
        audit = std::make_unique<AuditLog>(std::move(s), clock);
    }

    std::unique_ptr<SharedRuntimeState> state() {
        return std::make_unique<SharedRuntimeState>(config, load_snippets(config.snippet_dir), audit.get(), dir.path());
    }

    std::string config_json(const GlobalConfig& c) const { return serialize_config(c); }
};

RequestSummary get(std::string host) {
    RequestSummary r;
    r.method = "GET";
    r.host = std::move(host);
    return r;
}

}  // namespace

TEST_SUITE("runtime_state") {
    TEST_CASE("initial snapshot") {
        Fixture f;
        const auto state = f.state();
        const auto snap = state->snapshot();
        CHECK(snap->generation == 1);
        CHECK(snap->version == 1);
        CHECK_FALSE(snap->force_off);
        CHECK(snap->rules->size() == 2);
        CHECK(snap->snippets->count("warn") == 1);
    }

    TEST_CASE("force_off in the config starts with the kill switch engaged") {
        Fixture f;
        f.config.active_mode = ActiveMode::force_off;
        CHECK(f.state()->snapshot()->force_off);
    }

    TEST_CASE("disabling a transform rule takes it out of matching") {
        Fixture f;
        auto state = f.state();
        CHECK(match_request(get("cnn.com"), *state->snapshot()->rules).transform == "t");
        CHECK(state->set_mode("t", false) == SharedRuntimeState::ModeStatus::ok);
        const auto snap = state->snapshot();
        CHECK(snap->version == 2);
        CHECK(snap->generation == 1);
        CHECK(match_request(get("cnn.com"), *snap->rules).empty());
        const auto states = state->rule_states();
        REQUIRE(states.size() == 2);
        CHECK(states[1].id == "t");
        CHECK(states[1].configured_enabled);
        CHECK(states[1].override_enabled == false);
        CHECK_FALSE(states[1].effective_enabled);
        const auto event = json::parse(f.sink->lines().back());
        CHECK(event["kind"] == "mode-changed");
        CHECK(event["payload"]["target"] == "t");
        CHECK(event["payload"]["enabled"] == false);
    }

    TEST_CASE("unknown rules are reported and change nothing") {
        Fixture f;
        auto state = f.state();
        CHECK(state->set_mode("ghost", false) == SharedRuntimeState::ModeStatus::unknown_rule);
        CHECK(state->snapshot()->version == 1);
        CHECK(f.sink->lines().empty());
    }

    TEST_CASE("the kill switch flips force_off both ways") {
        Fixture f;
        auto state = f.state();
        state->set_mode("all", false);
        CHECK(state->snapshot()->force_off);
        for (const auto& s : state->rule_states()) CHECK_FALSE(s.effective_enabled);
        const auto d = state->describe();
        CHECK(d["force_off"] == true);
        CHECK(d["rules"].size() == 2);
        state->set_mode("all", true);
        CHECK_FALSE(state->snapshot()->force_off);
    }

    TEST_CASE("a reload with a bad snippet reference is rejected and the old state stays") {
        Fixture f;
        auto state = f.state();
        const auto before = state->snapshot();
        auto bad = f.config;
        bad.rules.mock.push_back(make_rule("m2", host_spec("x.com"), MockAction{"ghost"}));
        const auto report = state->reload(f.config_json(bad));
        CHECK_FALSE(report.ok());
        CHECK(state->snapshot() == before);
        CHECK(f.sink->lines().empty());
        CHECK_FALSE(state->reload("{ not json").ok());
        CHECK(state->snapshot() == before);
    }

    TEST_CASE("a reload adding a mock rule takes effect and is audited") {
        Fixture f;
        auto state = f.state();
        state->set_mode("t", false);
        auto next = f.config;
        next.rules.mock.push_back(make_rule("cnn", host_spec("cnn.com"), MockAction{"fake"}));
        const auto report = state->reload(f.config_json(next));
        CHECK(report.ok());
        CHECK(report.warnings.empty());
        const auto snap = state->snapshot();
        CHECK(snap->generation == 2);
        CHECK(snap->version == 3);
        CHECK(snap->overrides.empty());
        CHECK(match_request(get("cnn.com"), *snap->rules).mock == "cnn");
        const auto event = json::parse(f.sink->lines().back());
        CHECK(event["kind"] == "config-reloaded");
        CHECK(event["payload"]["old_rule_count"] == 2);
        CHECK(event["payload"]["new_rule_count"] == 3);
    }

    TEST_CASE("a reload keeps the kill switch and warns about restart-only settings") {
        Fixture f;
        auto state = f.state();
        state->set_mode("all", false);
        auto next = f.config;
        next.listen_address.port = 9999;
        const auto report = state->reload(next);
        CHECK(report.ok());
        CHECK(report.warnings.size() == 1);
        CHECK(state->snapshot()->force_off);
    }

    TEST_CASE("readers always see a whole snapshot while writers swap") {
        Fixture f;
        auto state = f.state();
        auto a = f.config;
        for (auto& r : a.rules.mock) r.id = "a-" + r.id;
        for (auto& r : a.rules.transform) r.id = "a-" + r.id;
        auto b = f.config;
        for (auto& r : b.rules.mock) r.id = "b-" + r.id;
        for (auto& r : b.rules.transform) r.id = "b-" + r.id;
        std::atomic<bool> done{false};
        std::atomic<int> mixed{0};
        std::thread reader([&] {
            while (!done) {
                const auto snap = state->snapshot();
                std::string prefix;
                for (const auto& r : snap->rules->mock()) prefix += r.rule.id.substr(0, 2);
                for (const auto& r : snap->rules->transform()) prefix += r.rule.id.substr(0, 2);
                if (prefix != "mt" && prefix != "a-a-" && prefix != "b-b-") ++mixed;
            }
        });
        for (int i = 0; i < 100; ++i) REQUIRE(state->reload(i % 2 ? a : b).ok());
        done = true;
        reader.join();
        CHECK(mixed == 0);
        CHECK(state->snapshot()->generation == 101);
    }
}
