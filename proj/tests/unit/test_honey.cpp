#include "clawtrap/honey.hpp"

#include "proxy_client.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <thread>

using namespace clawtrap;
using namespace clawtrap::testing;
using nlohmann::json;

namespace {

json report_body(const std::string& rule, std::int64_t at = 1000, std::uint64_t flow = 1) {
    return {{"flow_id", flow},
            {"rule_id", rule},
            {"category", "metadata-interface-access"},
            {"request_excerpt", {{"method", "GET"}, {"host", "100.100.100.200"}, {"path", "/latest/meta-data"}}},
            {"destination_ip", "100.100.100.200"},
            {"observed_at", at}};
}

VulnerabilityReport report(const std::string& rule, std::int64_t at = 1000) {
    return std::get<VulnerabilityReport>(parse_report(report_body(rule, at)));
}

struct Server {
    TempDir dir;
    std::unique_ptr<ReportStore> store = ReportStore::open(dir / "reports.jsonl");
    HoneyServer honey{*store};
    Server() {
        std::string error;
        REQUIRE(honey.start({"127.0.0.1", 0}, error));
    }
    std::optional<RawResponse> post(const json& body) {
        return http_request(honey.port(), "POST", "/api/report_vulnerability", body.dump(), "application/json");
    }
    json list(const std::string& query = "") {
        const auto r = http_request(honey.port(), "GET", "/api/reports" + query);
        REQUIRE(r);
        REQUIRE(r->status == 200);
        return json::parse(r->body);
    }
};

}  // namespace

TEST_SUITE("honey") {
    TEST_CASE("report validation names the offending fields") {
        auto body = report_body("meta-ip");
        CHECK(std::holds_alternative<VulnerabilityReport>(parse_report(body)));
        body.erase("rule_id");
        body["request_excerpt"].erase("host");
        body["observed_at"] = "yesterday";
        const auto problems = std::get<std::vector<FieldProblem>>(parse_report(body));
        std::vector<std::string> fields;
        for (const auto& p : problems) fields.push_back(p.field);
        std::sort(fields.begin(), fields.end());
        CHECK(fields == std::vector<std::string>{"observed_at", "request_excerpt.host", "rule_id"});
        CHECK(std::holds_alternative<std::vector<FieldProblem>>(parse_report(json::array())));
        auto wrong_version = report_body("r");
        wrong_version["schema_version"] = 2;
        CHECK(std::holds_alternative<std::vector<FieldProblem>>(parse_report(wrong_version)));
        auto bad_ip = report_body("r");
        bad_ip["destination_ip"] = "not-an-ip";
        CHECK(std::holds_alternative<std::vector<FieldProblem>>(parse_report(bad_ip)));
    }

    TEST_CASE("first post on a fresh store gets id 1") {
        Server s;
        CHECK(s.list() == json::array());
        const auto r = s.post(report_body("meta-ip"));
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(json::parse(r->body)["report_id"] == 1);
        const auto listed = s.list();
        REQUIRE(listed.size() == 1);
        CHECK(listed[0]["rule_id"] == "meta-ip");
        CHECK(listed[0]["schema_version"] == 1);
        CHECK(listed[0]["destination_ip"] == "100.100.100.200");
    }

    TEST_CASE("a report missing rule_id is a 400 naming the field") {
        Server s;
        auto body = report_body("x");
        body.erase("rule_id");
        const auto r = s.post(body);
        REQUIRE(r);
        CHECK(r->status == 400);
        const auto doc = json::parse(r->body);
        REQUIRE(doc["fields"].size() == 1);
        CHECK(doc["fields"][0]["field"] == "rule_id");
        const auto junk = http_request(s.honey.port(), "POST", "/api/report_vulnerability", "{oops", "application/json");
        REQUIRE(junk);
        CHECK(junk->status == 400);
        CHECK(s.store->size() == 0);
    }

    TEST_CASE("client-supplied report ids are ignored") {
        Server s;
        auto body = report_body("x");
        body["report_id"] = 77;
        CHECK(json::parse(s.post(body)->body)["report_id"] == 1);
    }

    TEST_CASE("concurrent posts get a gapless id sequence") {
        Server s;
        constexpr int kThreads = 8;
        constexpr int kEach = 25;
        std::mutex mu;
        std::vector<std::uint64_t> ids;
        std::vector<std::thread> threads;
        for (int t = 0; t < kThreads; ++t) {
            threads.emplace_back([&, t] {
                for (int i = 0; i < kEach; ++i) {
                    const auto r = s.post(report_body("r" + std::to_string(t), i));
                    if (!r || r->status != 200) continue;
                    std::lock_guard lock(mu);
                    ids.push_back(json::parse(r->body)["report_id"].get<std::uint64_t>());
                }
            });
        }
        for (auto& t : threads) t.join();
        std::sort(ids.begin(), ids.end());
        REQUIRE(ids.size() == kThreads * kEach);
        for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == i + 1);
        const auto listed = s.list();
        for (std::size_t i = 0; i < listed.size(); ++i) CHECK(listed[i]["report_id"] == i + 1);
    }

    TEST_CASE("filters by rule and time range") {
        Server s;
        s.post(report_body("a", 100));
        s.post(report_body("b", 200));
        s.post(report_body("a", 300));
        const auto only_a = s.list("?rule_id=a");
        REQUIRE(only_a.size() == 2);
        CHECK(only_a[0]["report_id"] == 1);
        CHECK(only_a[1]["report_id"] == 3);
        CHECK(s.list("?from=150&to=250").size() == 1);
        CHECK(s.list("?from=200").size() == 2);
        CHECK(s.list("?from=1000&to=2000") == json::array());
        for (const char* bad : {"?from=abc", "?from=5&to=1", "?to=-"}) {
            const auto r = http_request(s.honey.port(), "GET", std::string("/api/reports") + bad);
            REQUIRE(r);
            CHECK_MESSAGE(r->status == 400, bad);
        }
    }

    TEST_CASE("acknowledged reports survive reopening and ids are never reused") {
        TempDir dir;
        const auto path = dir / "reports.jsonl";
        {
            auto store = ReportStore::open(path);
            for (int i = 0; i < 5; ++i) CHECK(store->append(report("r", i)) == static_cast<std::uint64_t>(i + 1));
        }
        {
            std::ofstream torn(path, std::ios::app | std::ios::binary);
            torn << R"({"schema_version":1,"report_id":6,"flo)";
        }
        auto store = ReportStore::open(path);
        const auto listed = store->list();
        REQUIRE(listed.size() == 5);
        for (int i = 0; i < 5; ++i) {
            CHECK(listed[static_cast<std::size_t>(i)].report_id == static_cast<std::uint64_t>(i + 1));
            CHECK(listed[static_cast<std::size_t>(i)].observed_at == i);
        }
        CHECK(store->append(report("r")) == 6u);
        CHECK(ReportStore::open(path)->size() == 6);
    }

    TEST_CASE("a refused write is not acknowledged") {
        auto sink = std::make_unique<MemoryLineSink>();
        auto* raw = sink.get();
        ReportStore store(std::move(sink));
        raw->set_failing(true);
        CHECK_FALSE(store.append(report("r")));
        raw->set_failing(false);
        CHECK(store.append(report("r")) == 1u);
        CHECK(store.size() == 1);
    }
}
