#include "clawtrap/codec.hpp"
#include "clawtrap/transformer.hpp"

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "process.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

using namespace clawtrap;
using namespace clawtrap::testing;

namespace {

ResponseEnvelope html_page(std::string body, std::string content_type = "text/html; charset=utf-8") {
    ResponseEnvelope r;
    r.status = 200;
    r.reason = "OK";
    r.headers = {{"Content-Type", std::move(content_type)}, {"Content-Length", std::to_string(body.size())}};
    r.body = std::move(body);
    return r;
}

std::vector<CompiledSubstitution> literal(std::vector<std::pair<std::string, std::string>> pairs) {
    std::vector<Substitution> subs;
    for (auto& [p, r] : pairs) subs.push_back({p, r, false});
    return compile_substitutions(subs);
}

void check_headers_consistent(const ResponseEnvelope& r) {
    const auto length = header_value(r.headers, "Content-Length");
    REQUIRE(length);
    CHECK(*length == std::to_string(r.body.size()));
    const auto encoding = r.content_encoding();
    CHECK((!encoding || *encoding == "identity"));
}

}  // namespace

TEST_SUITE("transformer") {
    TEST_CASE("replace serves the snippet bytes whatever the page was") {
        const auto snippet = html_snippet("fake_news", read_file(source_dir_fixture("fake_news.html")));
        const auto a = apply_replace(html_page("<html>real page one</html>"), snippet);
        const auto b = apply_replace(html_page(std::string(5000, 'z')), snippet);
        CHECK(a.response.body == snippet.body);
        CHECK(a.outcome.applied);
        CHECK(a.outcome.mode == AttackMode::replace);
        CHECK(a.outcome.bytes_after == 120);
        CHECK(a.response == b.response);
        check_headers_consistent(a.response);
    }

    TEST_CASE("replace skips non-html content under the default filter") {
        const auto page = html_page("%PDF-1.4", "application/pdf");
        const auto r = apply_replace(page, html_snippet("s", "x"));
        CHECK_FALSE(r.outcome.applied);
        CHECK(r.outcome.skip_reason == SkipReason::content_type_mismatch);
        CHECK(r.response == page);
        CHECK(r.outcome.bytes_before == r.outcome.bytes_after);
    }

    TEST_CASE("replace with an empty snippet yields Content-Length 0") {
        const auto r = apply_replace(html_page("<p>x</p>"), html_snippet("empty", ""));
        CHECK(r.response.body.empty());
        CHECK(*header_value(r.response.headers, "Content-Length") == "0");
    }

    TEST_CASE("inject before the closing body tag") {
        const auto r = apply_inject(html_page("<html><body>hi</body></html>"), html_snippet("w", "<iframe>W</iframe>"));
        CHECK(r.response.body == "<html><body>hi<iframe>W</iframe></body></html>");
        CHECK(r.outcome.applied);
        CHECK_FALSE(r.outcome.skip_reason);
        check_headers_consistent(r.response);
    }

    TEST_CASE("inject picks the last of several case-variant tags") {
        const std::string body = "<body>a</BODY>b</Body>c";
        const auto r = apply_inject(html_page(body), html_snippet("w", "[W]"));
        const auto positions = oracle::closing_body_positions(body);
        REQUIRE(positions.size() == 2);
        CHECK(r.response.body == body.substr(0, positions.back()) + "[W]" + body.substr(positions.back()));
    }

    TEST_CASE("inject with the shipped warning snippet keeps the page intact") {
        const auto warning = read_file(std::filesystem::path(source_dir()) /
                                       "demo/snippets/attack_b/security_warning.html");
        const std::string page = "<!doctype html><html><head><title>Google</title></head><body><div id=q></div>"
                                 "<script>var s='</body>';</script></body>\n</html>\n";
        const auto r = apply_inject(html_page(page), html_snippet("security_warning", warning));
        const auto at = oracle::closing_body_positions(page).back();
        CHECK(r.response.body.substr(0, at) == page.substr(0, at));
        CHECK(r.response.body.substr(at + warning.size()) == page.substr(at));
        CHECK(r.response.body.find(warning) == at);
        CHECK(r.response.body.find(warning, at + 1) == std::string::npos);
    }

    TEST_CASE("inject without a closing tag appends and says so") {
        const auto r = apply_inject(html_page("<p>fragment"), html_snippet("w", "<b>W</b>"));
        CHECK(r.response.body == "<p>fragment<b>W</b>");
        CHECK(r.outcome.applied);
        CHECK(r.outcome.skip_reason == SkipReason::no_insertion_point_fallback_used);
    }

    TEST_CASE("compressed bodies are decoded and sent back as identity") {
        const std::string page = "<html><body>zipped</body></html>";
        auto resp = html_page(gzip_compress(page));
        resp.headers.emplace_back("Content-Encoding", "gzip");
        const auto r = apply_inject(resp, html_snippet("w", "!"));
        CHECK(r.response.body == "<html><body>zipped!</body></html>");
        CHECK_FALSE(r.response.content_encoding());
        check_headers_consistent(r.response);
    }

    TEST_CASE("undecodable bodies pass through untouched") {
        auto br = html_page("\x1b\x02\x00");
        br.headers.emplace_back("Content-Encoding", "br");
        auto r = apply_inject(br, html_snippet("w", "!"));
        CHECK_FALSE(r.outcome.applied);
        CHECK(r.outcome.skip_reason == SkipReason::undecodable_encoding);
        CHECK(r.response == br);

        auto corrupt = html_page("definitely not gzip");
        corrupt.headers.emplace_back("Content-Encoding", "gzip");
        r = apply_substitute(corrupt, literal({{"not", "yes"}}));
        CHECK(r.outcome.skip_reason == SkipReason::undecodable_encoding);
        CHECK(r.response == corrupt);

        const auto bad_utf8 = html_page("<body>\xff</body>");
        r = apply_inject(bad_utf8, html_snippet("w", "!"));
        CHECK(r.outcome.skip_reason == SkipReason::undecodable_encoding);

        const auto latin1 = html_page("<body>\xe9</body>", "text/html; charset=iso-8859-1");
        r = apply_inject(latin1, html_snippet("w", "!"));
        CHECK(r.outcome.applied);
    }

    TEST_CASE("bodies over the cap pass through") {
        TransformOptions options;
        options.body_cap = 10;
        const auto big = html_page("<body>" + std::string(20, 'x') + "</body>");
        const auto r = apply_inject(big, html_snippet("w", "!"), InsertionPoint::before_closing_body, options);
        CHECK_FALSE(r.outcome.applied);
        CHECK(r.outcome.skip_reason == SkipReason::body_over_cap);
        CHECK(r.response == big);
    }

    TEST_CASE("content type filter wildcards") {
        const auto json = html_page("{}", "application/json");
        CHECK(content_type_allowed(json, {"application/*"}));
        CHECK(content_type_allowed(json, {"*/*"}));
        CHECK_FALSE(content_type_allowed(json, {"text/*"}));
        ResponseEnvelope untyped;
        CHECK_FALSE(content_type_allowed(untyped, {"*/*"}));
    }

    TEST_CASE("substitute examples") {
        auto r = apply_substitute(html_page("price: 10"), literal({{"10", "99"}}));
        CHECK(r.response.body == "price: 99");
        CHECK(r.outcome.substitution_count == 1);
        r = apply_substitute(html_page("aaa"), literal({{"aa", "b"}}));
        CHECK(r.response.body == "ba");
        CHECK(r.outcome.substitution_count == 1);
        r = apply_substitute(html_page("ab"), literal({{"a", "b"}, {"b", "c"}}));
        CHECK(r.response.body == "cc");
        CHECK(r.outcome.substitution_count == 3);
    }

    TEST_CASE("regex substitution uses perl replacement syntax") {
        const auto subs = compile_substitutions({{"price: ([0-9]+)", "price: $1.99", true}});
        const auto r = apply_substitute(html_page("price: 10, price: 7"), subs);
        CHECK(r.response.body == "price: 10.99, price: 7.99");
        CHECK(r.outcome.substitution_count == 2);
    }

    TEST_CASE("substitute agrees with the scan-and-splice reference") {
        Gen g(99);
        for (int i = 0; i < 3000; ++i) {
            const auto body = g.text(60, "ab<>/ xy");
            std::vector<std::pair<std::string, std::string>> pairs;
            const int n = g.range(1, 3);
            for (int k = 0; k < n; ++k) {
                std::string pattern = g.text(3, "ab<>/ xy");
                if (pattern.empty()) pattern = "a";
                pairs.emplace_back(pattern, g.text(4, "ab<>/ xyz"));
            }
            const auto r = apply_substitute(html_page(body), literal(pairs));
            const auto [want, count] = oracle::substitute_literal(body, pairs);
            REQUIRE_MESSAGE(r.response.body == want, "body '" << body << "'");
            CHECK(r.outcome.substitution_count == count);
            check_headers_consistent(r.response);
        }
    }

    TEST_CASE("applying a self-free pair twice equals applying it once") {
        Gen g(100);
        int checked = 0;
        for (int i = 0; i < 2000; ++i) {
            std::string pattern = g.text(3, "abc");
            if (pattern.empty()) continue;
            const auto replacement = g.text(3, "abcxy");
            if (replacement.find(pattern) != std::string::npos) continue;
            const auto body = g.text(40, "abcxy");
            const auto subs = literal({{pattern, replacement}});
            const auto once = apply_substitute(html_page(body), subs);
            const auto twice = apply_substitute(once.response, subs);
            // A splice can create a new occurrence across its boundary; only skip those.
            if (twice.outcome.substitution_count != 0) continue;
            CHECK(twice.response.body == once.response.body);
            ++checked;
        }
        CHECK(checked > 500);
    }

    TEST_CASE("inject agrees with the reference scanner on random pages") {
        Gen g(101);
        for (int i = 0; i < 2000; ++i) {
            const auto body = g.html_body();
            const auto snippet = g.text(8, "<>WARN");
            const auto r = apply_inject(html_page(body), html_snippet("w", snippet));
            REQUIRE(r.outcome.applied);
            const auto positions = oracle::closing_body_positions(body);
            const auto at = positions.empty() ? body.size() : positions.back();
            CHECK(r.response.body == body.substr(0, at) + snippet + body.substr(at));
            CHECK(find_last_closing_body(body) == (positions.empty() ? std::string::npos : positions.back()));
            check_headers_consistent(r.response);
        }
    }

    TEST_CASE("skipped transforms are byte-identical for every mode") {
        Gen g(102);
        for (int i = 0; i < 300; ++i) {
            const auto page = html_page(g.html_body(), g.chance(0.5) ? "image/png" : "application/octet-stream");
            CHECK(apply_replace(page, html_snippet("s", "x")).response == page);
            CHECK(apply_inject(page, html_snippet("s", "x")).response == page);
            CHECK(apply_substitute(page, literal({{"b", "c"}})).response == page);
        }
    }

    TEST_CASE("mock responses") {
        const auto snippet = html_snippet("fake_news", read_file(source_dir_fixture("fake_news.html")));
        auto r = make_mock_response(MockAction{"fake_news", 200, std::nullopt}, snippet);
        CHECK(r.status == 200);
        CHECK(r.body == snippet.body);
        CHECK(*r.content_type() == "text/html");
        CHECK(*header_value(r.headers, "Server") == kMockServerHeader);
        r = make_mock_response(MockAction{"empty", 404, "text/plain"}, html_snippet("empty", ""));
        CHECK(r.status == 404);
        CHECK(r.reason == "Not Found");
        CHECK(*header_value(r.headers, "Content-Length") == "0");
        CHECK(*r.content_type() == "text/plain");
    }
}
