#include "clawtrap/codec.hpp"
#include "clawtrap/proxy_server.hpp"

#include "fake_upstream.hpp"
#include "live_app.hpp"
#include "proxy_client.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <mutex>
#include <set>
#include <thread>

using namespace clawtrap;
using namespace clawtrap::testing;
using nlohmann::json;

namespace {

const std::string kPage = "<html><body>ok</body></html>";

std::vector<json> flow_payloads(Application& app) {
    std::vector<json> out;
    for (const auto& e : app.audit().events_after(0)) {
        if (e.kind == AuditKind::flow_completed) out.push_back(json::parse(e.line)["payload"]);
    }
    return out;
}

std::string resolve_to(const FakeUpstream& up) { return "127.0.0.1:" + std::to_string(up.port()); }

}  // namespace

TEST_SUITE("proxy") {
    TEST_CASE("absolute-form targets parse") {
        auto t = parse_proxy_target("http://Example.COM:8080/a/b?c=d");
        REQUIRE(t);
        CHECK(t->host == "example.com");
        CHECK(t->port == 8080);
        CHECK(t->path == "/a/b?c=d");
        t = parse_proxy_target("http://bbc.com");
        REQUIRE(t);
        CHECK(t->port == 80);
        CHECK(t->path == "/");
        t = parse_proxy_target("https://[::1]/x");
        REQUIRE(t);
        CHECK(t->host == "::1");
        CHECK(t->port == 443);
        CHECK_FALSE(parse_proxy_target("/origin-form"));
        CHECK_FALSE(parse_proxy_target("ftp://a/"));
        CHECK_FALSE(parse_proxy_target("http://:80/"));
    }

    TEST_CASE("passthrough delivers upstream bytes unchanged") {
        FakeUpstream up([](const SeenRequest&) { return FakeUpstream::response(200, "text/html", "<body>ok</body>"); });
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["site.test"] = resolve_to(up); });
        const auto r = proxy_get(live.proxy_port(), "http://site.test/page?q=1");
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(r->body == "<body>ok</body>");
        REQUIRE(up.requests().size() == 1);
        CHECK(up.requests()[0].target == "/page?q=1");
        CHECK(up.requests()[0].header("Host") == "site.test");
        const auto flows = flow_payloads(live.app());
        REQUIRE(flows.size() == 1);
        CHECK(flows[0]["outcome"]["detections"].empty());
        CHECK(flows[0]["outcome"]["mock"].is_null());
        CHECK(flows[0]["outcome"]["transform"].is_null());
        CHECK(flows[0]["request"]["host"] == "site.test");
        CHECK(flows[0]["request"]["destination_ip"] == "127.0.0.1");
    }

    TEST_CASE("a mocked host is served locally with zero upstream connections") {
        FakeUpstream up([](const SeenRequest&) { return FakeUpstream::response(200, "text/html", "real"); });
        LiveApp live({{"fake_news.html", "<h1>forged</h1>"}}, [&](GlobalConfig& c) {
            c.resolve["bbc.com"] = resolve_to(up);
            c.rules.mock.push_back(make_rule("bbc", host_spec("bbc.com"), MockAction{"fake_news"}));
        });
        const auto r = proxy_get(live.proxy_port(), "http://bbc.com/");
        REQUIRE(r);
        CHECK(r->body == "<h1>forged</h1>");
        CHECK(*r->header("Server") == "clawtrap-mock");
        CHECK(up.connections() == 0);
    }

    TEST_CASE("keep-alive serves several requests on one client connection") {
        FakeUpstream up([](const SeenRequest& r) { return FakeUpstream::response(200, "text/plain", r.target); });
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["site.test"] = resolve_to(up); });
        ClientConnection conn(live.proxy_port());
        REQUIRE(conn.ok());
        for (const char* path : {"/one", "/two", "/three"}) {
            REQUIRE(conn.send(std::string("GET http://site.test") + path + " HTTP/1.1\r\nHost: site.test\r\n\r\n"));
            const auto r = conn.read_response();
            REQUIRE(r);
            CHECK(r->body == path);
        }
        CHECK(flow_payloads(live.app()).size() == 3);
    }

    TEST_CASE("request bodies are forwarded") {
        FakeUpstream up([](const SeenRequest& r) { return FakeUpstream::response(201, "text/plain", "got " + r.body); });
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["site.test"] = resolve_to(up); });
        const auto raw = proxy_exchange(live.proxy_port(),
                                        "POST http://site.test/submit HTTP/1.1\r\nHost: site.test\r\n"
                                        "Content-Length: 5\r\nConnection: close\r\n\r\nhello");
        const auto r = parse_framed_response(raw);
        REQUIRE(r);
        CHECK(r->status == 201);
        CHECK(r->body == "got hello");
    }

    TEST_CASE("a refused upstream becomes a 502 with a record") {
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["down.test"] = "127.0.0.1:" + std::to_string(closed_port()); });
        const auto r = proxy_get(live.proxy_port(), "http://down.test/");
        REQUIRE(r);
        CHECK(r->status == 502);
        const auto flows = flow_payloads(live.app());
        REQUIRE(flows.size() == 1);
        CHECK(flows[0]["error"] == "upstream-refused");
        CHECK(flows[0]["client_status"] == 502);
    }

    TEST_CASE("an unresolvable host is a dns failure") {
        LiveApp live(std::map<std::string, std::string>{});
        const auto r = proxy_get(live.proxy_port(), "http://nowhere.invalid/");
        REQUIRE(r);
        CHECK(r->status == 502);
        CHECK(flow_payloads(live.app()).at(0)["error"] == "dns-failure");
    }

    TEST_CASE("malformed requests get a 400 and are still recorded") {
        LiveApp live(std::map<std::string, std::string>{});
        const auto raw = proxy_exchange(live.proxy_port(), "GARBAGE\r\n\r\n");
        const auto r = parse_framed_response(raw);
        REQUIRE(r);
        CHECK(r->status == 400);
        const auto relative = parse_framed_response(
            proxy_exchange(live.proxy_port(), "GET /no-host HTTP/1.1\r\nConnection: close\r\n\r\n"));
        REQUIRE(relative);
        CHECK(relative->status == 400);
        const auto flows = flow_payloads(live.app());
        REQUIRE(flows.size() == 2);
        CHECK(flows[0]["error"] == "bad-request");
    }

    TEST_CASE("gzip pages are decoded, injected and returned as identity") {
        const std::string page = "<html><body>zipped page</body></html>";
        FakeUpstream up([&](const SeenRequest&) {
            return FakeUpstream::response(200, "text/html", gzip_compress(page), {{"Content-Encoding", "gzip"}});
        });
        LiveApp live({{"warn.html", "<b>W</b>"}}, [&](GlobalConfig& c) {
            c.resolve["site.test"] = resolve_to(up);
            c.rules.transform.push_back(make_rule("w", host_spec("site.test"), inject_action("warn")));
        });
        const auto r = proxy_get(live.proxy_port(), "http://site.test/", {{"Accept-Encoding", "gzip"}});
        REQUIRE(r);
        CHECK(r->body == "<html><body>zipped page<b>W</b></body></html>");
        CHECK_FALSE(r->header("Content-Encoding"));
        CHECK(up.requests().at(0).header("Accept-Encoding").empty());
    }

    TEST_CASE("tunnel-only CONNECT relays bytes opaquely and records one tunneled flow") {
        FakeUpstream up([](const SeenRequest&) { return FakeUpstream::response(200, "text/html", kPage); });
        LiveApp live({{"warn.html", "<b>W</b>"}}, [&](GlobalConfig& c) {
            c.resolve["example.com"] = resolve_to(up);
            c.rules.transform.push_back(make_rule("w", host_spec("*"), inject_action("warn")));
        });
        {
            ClientConnection conn(live.proxy_port());
            REQUIRE(conn.connect_tunnel("example.com:443") == 200);
            REQUIRE(conn.send("GET / HTTP/1.1\r\nHost: example.com\r\nConnection: close\r\n\r\n"));
            const auto r = parse_framed_response(conn.read_all());
            REQUIRE(r);
            CHECK(r->body == kPage);  // opaque: no injection inside a tunnel
        }
        for (int i = 0; i < 100 && flow_payloads(live.app()).empty(); ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        const auto flows = flow_payloads(live.app());
        REQUIRE(flows.size() == 1);
        CHECK(flows[0]["tunneled"] == true);
        CHECK(flows[0]["request"]["method"] == "CONNECT");
        CHECK(flows[0]["outcome"]["detections"].empty());
        CHECK(flows[0]["outcome"]["transform"].is_null());
    }

    TEST_CASE("CONNECT to a refused port answers 502") {
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["down.test"] = "127.0.0.1:" + std::to_string(closed_port()); });
        ClientConnection conn(live.proxy_port());
        CHECK(conn.connect_tunnel("down.test:443") == 502);
    }

    TEST_CASE("100 concurrent passthrough requests give 100 records with unique ids") {
        FakeUpstream up([](const SeenRequest& r) { return FakeUpstream::response(200, "text/plain", r.target); });
        LiveApp live({}, [&](GlobalConfig& c) { c.resolve["site.test"] = resolve_to(up); });
        std::vector<std::thread> threads;
        std::mutex mu;
        int ok = 0;
        for (int t = 0; t < 100; ++t) {
            threads.emplace_back([&, t] {
                const auto r = proxy_get(live.proxy_port(), "http://site.test/" + std::to_string(t));
                std::lock_guard lock(mu);
                if (r && r->body == "/" + std::to_string(t)) ++ok;
            });
        }
        for (auto& t : threads) t.join();
        CHECK(ok == 100);
        const auto flows = flow_payloads(live.app());
        REQUIRE(flows.size() == 100);
        std::set<std::uint64_t> ids;
        for (const auto& f : flows) ids.insert(f["flow_id"].get<std::uint64_t>());
        CHECK(ids.size() == 100);
        CHECK(*ids.begin() == 1);
        CHECK(*ids.rbegin() == 100);
    }

    TEST_CASE("stop lets an in-flight exchange finish") {
        FakeUpstream up([](const SeenRequest&) {
            std::this_thread::sleep_for(std::chrono::milliseconds(300));
            return FakeUpstream::response(200, "text/plain", "slow");
        });
        auto live = std::make_unique<LiveApp>(std::map<std::string, std::string>{},
                                              [&](GlobalConfig& c) { c.resolve["slow.test"] = resolve_to(up); });
        std::optional<RawResponse> result;
        std::thread client([&] { result = proxy_get(live->proxy_port(), "http://slow.test/"); });
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        live->app().stop();
        client.join();
        REQUIRE(result);
        CHECK(result->body == "slow");
    }
}
