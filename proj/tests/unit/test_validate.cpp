#include "clawtrap/validate.hpp"

#include "fixtures.hpp"
#include "process.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

using namespace clawtrap;
using namespace clawtrap::testing;

namespace {

struct Setup {
    TempDir dir;
    GlobalConfig config;
    Setup() {
        write_file(dir / "snippets/page.html", "<p>x</p>");
        config = base_config((dir / "snippets").string());
        config.listen_address.port = 18080;
        config.control_address.port = 18081;
        config.honey_address.port = 18082;
    }
};

bool has_error(const ValidationReport& r, const std::string& rule, const std::string& fragment) {
    for (const auto& d : r.errors) {
        if (d.rule_id == rule && d.message.find(fragment) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("validate") {
    TEST_CASE("missing snippet reference is one unresolved-snippet error") {
        Setup s;
        s.config.rules.mock.push_back(make_rule("m", host_spec("bbc.com"), MockAction{"ghost"}));
        s.config.rules.transform.push_back(make_rule("t", host_spec("*"), inject_action("page")));
        const auto report = validate(s.config);
        REQUIRE(report.errors.size() == 1);
        CHECK(report.errors[0] == Diagnostic{"m", "unresolved snippet: ghost"});
        CHECK(report.to_text().find("1 error, 0 warnings") != std::string::npos);
    }

    TEST_CASE("empty match spec is one error on that rule") {
        Setup s;
        s.config.rules.detection.push_back(make_rule("d", MatchSpec{}, DetectAction{}));
        const auto report = validate(s.config);
        REQUIRE(report.errors.size() == 1);
        CHECK(report.errors[0].rule_id == "d");
    }

    TEST_CASE("shipped demo configs validate cleanly") {
        for (const char* name : {"attack_a.json", "attack_b.json"}) {
            const auto config = load_config_file(std::filesystem::path(source_dir()) / "demo" / name);
            const auto report = validate(config);
            CHECK_MESSAGE(report.errors.empty(), name << "\n" << report.to_text());
            CHECK_MESSAGE(report.warnings.empty(), name << "\n" << report.to_text());
        }
        const auto b = load_config_file(std::filesystem::path(source_dir()) / "demo" / "attack_b.json");
        REQUIRE(b.rules.transform.size() >= 1);
        CHECK(*b.rules.transform[0].match.host == "*.google.com");
        CHECK(std::get<AttackAction>(b.rules.transform[0].action).mode == AttackMode::inject);
    }

    TEST_CASE("addresses must be pairwise distinct except ephemeral ports") {
        Setup s;
        s.config.honey_address = s.config.control_address;
        CHECK_FALSE(validate(s.config).ok());
        s.config.honey_address.port = 0;
        s.config.control_address.port = 0;
        CHECK(validate(s.config).ok());
    }

    TEST_CASE("rule level invariants") {
        Setup s;
        s.config.rules.mock.push_back(make_rule("bad-status", host_spec("a.com"), MockAction{"page", 700}));
        MatchSpec bad_regex;
        bad_regex.path = "^/(unclosed";
        s.config.rules.detection.push_back(make_rule("bad-regex", bad_regex, DetectAction{}));
        MatchSpec bad_ip;
        bad_ip.destination_ip = "10.0.0.0/33";
        s.config.rules.detection.push_back(make_rule("bad-ip", bad_ip, DetectAction{}));
        MatchSpec bad_method;
        bad_method.methods = std::vector<std::string>{"FETCH"};
        s.config.rules.detection.push_back(make_rule("bad-method", bad_method, DetectAction{}));
        AttackAction sub;
        sub.mode = AttackMode::substitute;
        s.config.rules.transform.push_back(make_rule("no-pairs", host_spec("*"), sub));
        AttackAction bad_sub;
        bad_sub.mode = AttackMode::substitute;
        bad_sub.substitutions.push_back({"(", "x", true});
        s.config.rules.transform.push_back(make_rule("bad-sub", host_spec("*"), bad_sub));
        s.config.rules.transform.push_back(make_rule("all", host_spec("*"), inject_action("page")));
        s.config.rules.transform.push_back(make_rule("", host_spec("*"), inject_action("page")));

        const auto report = validate(s.config);
        CHECK(has_error(report, "bad-status", "mock status"));
        CHECK(has_error(report, "bad-regex", ""));
        CHECK(has_error(report, "bad-ip", "destination_ip"));
        CHECK(has_error(report, "bad-method", "FETCH"));
        CHECK(has_error(report, "no-pairs", ""));
        CHECK(has_error(report, "bad-sub", ""));
        CHECK(has_error(report, "all", "reserved"));
        CHECK(has_error(report, "", "empty id"));
    }

    TEST_CASE("disabled rules and unused snippets are warnings only") {
        Setup s;
        write_file(s.dir / "snippets/unused.html", "");
        s.config.rules.transform.push_back(make_rule("t", host_spec("*"), inject_action("page"), false));
        const auto report = validate(s.config);
        CHECK(report.ok());
        CHECK(report.warnings.size() == 2);
        const auto json = nlohmann::json::parse(report.to_json());
        CHECK(json["ok"] == true);
        CHECK(json["warnings"].size() == 2);
    }

    TEST_CASE("missing snippet dir and intercept without a CA are errors") {
        Setup s;
        s.config.snippet_dir = (s.dir / "missing").string();
        CHECK_FALSE(validate(s.config).ok());
        Setup t;
        t.config.tls.mode = TlsMode::intercept;
        CHECK_FALSE(validate(t.config).ok());
        t.config.tls.ca_cert_path = (t.dir / "ca.pem").string();
        t.config.tls.ca_key_path = (t.dir / "ca-key.pem").string();
        CHECK_FALSE(validate(t.config).ok());
    }

    TEST_CASE("resolve entries must name IP addresses") {
        Setup s;
        s.config.resolve["bbc.com"] = "127.0.0.1:9000";
        s.config.resolve["x.com"] = "::1";
        CHECK(validate(s.config).ok());
        s.config.resolve["y.com"] = "example.org";
        CHECK_FALSE(validate(s.config).ok());
    }
}
