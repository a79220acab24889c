#include "clawtrap/transformer.hpp"

#include "clawtrap/codec.hpp"

#include <algorithm>

namespace clawtrap {

std::string_view to_string(SkipReason reason) {
    switch (reason) {
        case SkipReason::content_type_mismatch: return "content-type-mismatch";
        case SkipReason::undecodable_encoding: return "undecodable-encoding";
        case SkipReason::no_insertion_point_fallback_used: return "no-insertion-point-fallback-used";
        case SkipReason::body_over_cap: return "body-over-cap";
    }
    return "unknown";
}

namespace {

struct Decoded {
    std::string text;
    std::optional<SkipReason> skip;
};

std::vector<std::string> encoding_tokens(std::string_view value) {
    std::vector<std::string> out;
    while (!value.empty()) {
        const auto comma = value.find(',');
        auto token = value.substr(0, comma);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (!token.empty()) out.push_back(to_lower(token));
        if (comma == std::string_view::npos) break;
        value.remove_prefix(comma + 1);
    }
    return out;
}

// Undoes Content-Encoding and checks the charset is one we can edit byte-wise.
Decoded decode_text_body(const ResponseEnvelope& response, std::size_t cap) {
    if (response.body.size() > cap) return {{}, SkipReason::body_over_cap};
    std::string text = response.body;
    if (const auto encoding = response.content_encoding()) {
        auto tokens = encoding_tokens(*encoding);
        for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
            std::string decoded;
            InflateStatus status = InflateStatus::ok;
            if (*it == "identity") continue;
            if (*it == "gzip" || *it == "x-gzip") {
                status = gunzip(text, cap, decoded);
            } else if (*it == "deflate") {
                status = inflate_deflate(text, cap, decoded);
            } else {
                return {{}, SkipReason::undecodable_encoding};
            }
            if (status == InflateStatus::too_large) return {{}, SkipReason::body_over_cap};
            if (status != InflateStatus::ok) return {{}, SkipReason::undecodable_encoding};
            text = std::move(decoded);
        }
    }
    const auto charset = response.content_type() ? charset_param(*response.content_type()) : std::nullopt;
    if (!charset || *charset == "utf-8" || *charset == "utf8" || *charset == "us-ascii" || *charset == "ascii") {
        if (!is_valid_utf8(text)) return {{}, SkipReason::undecodable_encoding};
    } else if (*charset != "iso-8859-1" && *charset != "latin1" && *charset != "windows-1252") {
        return {{}, SkipReason::undecodable_encoding};
    }
    return {std::move(text), std::nullopt};
}

TransformResult skipped(ResponseEnvelope response, AttackMode mode, SkipReason reason) {
    TransformOutcome outcome;
    outcome.mode = mode;
    outcome.bytes_before = outcome.bytes_after = response.body.size();
    outcome.skip_reason = reason;
    return {std::move(response), outcome};
}

void finish_headers(ResponseEnvelope& response) {
    remove_header(response.headers, "Content-Encoding");
    remove_header(response.headers, "Transfer-Encoding");
    set_header(response.headers, "Content-Length", std::to_string(response.body.size()));
}

}  // namespace

bool content_type_allowed(const ResponseEnvelope& response, const std::vector<std::string>& filter) {
    const auto declared = response.content_type();
    if (!declared) return false;
    const auto type = media_type(*declared);
    for (const auto& entry : filter) {
        const auto want = media_type(entry);
        if (want == "*/*" || want == type) return true;
        if (want.size() > 2 && want.ends_with("/*") && type.starts_with(want.substr(0, want.size() - 1))) {
            return true;
        }
    }
    return false;
}

std::size_t find_last_closing_body(std::string_view text) {
    static constexpr std::string_view kTag = "</body>";
    if (text.size() < kTag.size()) return std::string_view::npos;
    for (std::size_t i = text.size() - kTag.size() + 1; i-- > 0;) {
        if (iequals(text.substr(i, kTag.size()), kTag)) return i;
    }
    return std::string_view::npos;
}

TransformResult apply_replace(ResponseEnvelope response, const Snippet& snippet, const TransformOptions& options) {
    if (!content_type_allowed(response, options.content_type_filter)) {
        return skipped(std::move(response), AttackMode::replace, SkipReason::content_type_mismatch);
    }
    TransformOutcome outcome;
    outcome.applied = true;
    outcome.mode = AttackMode::replace;
    outcome.bytes_before = response.body.size();
    response.body = snippet.body;
    set_header(response.headers, "Content-Type", snippet.content_type);
    finish_headers(response);
    outcome.bytes_after = response.body.size();
    return {std::move(response), outcome};
}

TransformResult apply_inject(ResponseEnvelope response, const Snippet& snippet, InsertionPoint point,
                             const TransformOptions& options) {
    (void)point;  // before_closing_body is the only insertion point
    if (!content_type_allowed(response, options.content_type_filter)) {
        return skipped(std::move(response), AttackMode::inject, SkipReason::content_type_mismatch);
    }
    auto decoded = decode_text_body(response, options.body_cap);
    if (decoded.skip) return skipped(std::move(response), AttackMode::inject, *decoded.skip);

    TransformOutcome outcome;
    outcome.applied = true;
    outcome.mode = AttackMode::inject;
    outcome.bytes_before = response.body.size();
    auto& text = decoded.text;
    const auto at = find_last_closing_body(text);
    if (at == std::string::npos) {
        text.append(snippet.body);
        outcome.skip_reason = SkipReason::no_insertion_point_fallback_used;
    } else {
        text.insert(at, snippet.body);
    }
    response.body = std::move(text);
    finish_headers(response);
    outcome.bytes_after = response.body.size();
    return {std::move(response), outcome};
}

TransformResult apply_substitute(ResponseEnvelope response, std::span<const CompiledSubstitution> subs,
                                 const TransformOptions& options) {
    if (!content_type_allowed(response, options.content_type_filter)) {
        return skipped(std::move(response), AttackMode::substitute, SkipReason::content_type_mismatch);
    }
    auto decoded = decode_text_body(response, options.body_cap);
    if (decoded.skip) return skipped(std::move(response), AttackMode::substitute, *decoded.skip);

    TransformOutcome outcome;
    outcome.applied = true;
    outcome.mode = AttackMode::substitute;
    outcome.bytes_before = response.body.size();
    std::string text = std::move(decoded.text);
    for (const auto& sub : subs) {
        if (sub.regex) {
            std::size_t count = 0;
            const auto& replacement = sub.spec.replacement;
            text = boost::regex_replace(text, *sub.regex, [&](const boost::smatch& m) {
                ++count;
                return m.format(replacement);
            });
            outcome.substitution_count += count;
            continue;
        }
        const auto& pattern = sub.spec.pattern;
        if (pattern.empty()) continue;
        std::string out;
        out.reserve(text.size());
        std::size_t pos = 0;
        while (true) {
            const auto hit = text.find(pattern, pos);
            if (hit == std::string::npos) break;
            out.append(text, pos, hit - pos).append(sub.spec.replacement);
            pos = hit + pattern.size();
            ++outcome.substitution_count;
        }
        out.append(text, pos, std::string::npos);
        text = std::move(out);
    }
    response.body = std::move(text);
    finish_headers(response);
    outcome.bytes_after = response.body.size();
    return {std::move(response), outcome};
}

ResponseEnvelope make_mock_response(const MockAction& action, const Snippet& snippet) {
    ResponseEnvelope response;
    response.status = action.status;
    response.reason = std::string(reason_phrase(action.status));
    response.body = snippet.body;
    response.headers = {
        {"Content-Type", action.content_type.value_or(snippet.content_type)},
        {"Content-Length", std::to_string(snippet.body.size())},
        {"Server", std::string(kMockServerHeader)},
    };
    return response;
}

TransformResult apply_attack(ResponseEnvelope response, const CompiledRule& rule, const SnippetMap& snippets,
                             std::size_t body_cap) {
    const auto& action = std::get<AttackAction>(rule.rule.action);
    const TransformOptions options{action.content_type_filter, body_cap};
    TransformResult result;
    if (action.mode == AttackMode::substitute) {
        result = apply_substitute(std::move(response), rule.substitutions, options);
    } else {
        // Snippets were resolved at validation time; a reload swaps rules and snippets together.
        const auto it = snippets.find(action.snippet);
        static const Snippet kEmpty;
        const Snippet& snippet = it == snippets.end() ? kEmpty : it->second;
        result = action.mode == AttackMode::replace ? apply_replace(std::move(response), snippet, options)
                                                    : apply_inject(std::move(response), snippet, action.insertion,
                                                                   options);
    }
    result.outcome.rule_id = rule.rule.id;
    return result;
}

}  // namespace clawtrap
