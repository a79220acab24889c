#pragma once

#include "clawtrap/config.hpp"
#include "clawtrap/http.hpp"
#include "clawtrap/matcher.hpp"
#include "clawtrap/patterns.hpp"
#include "clawtrap/snippets.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

enum class SkipReason {
    content_type_mismatch,
    undecodable_encoding,
    no_insertion_point_fallback_used,  // informational: inject still applied
    body_over_cap,
};

std::string_view to_string(SkipReason reason);

struct TransformOutcome {
    bool applied = false;
    std::optional<AttackMode> mode;
    std::optional<std::string> rule_id;
    std::size_t bytes_before = 0;
    std::size_t bytes_after = 0;
    std::size_t substitution_count = 0;
    std::optional<SkipReason> skip_reason;

    bool operator==(const TransformOutcome&) const = default;
};

struct TransformResult {
    ResponseEnvelope response;
    TransformOutcome outcome;
};

struct TransformOptions {
    std::vector<std::string> content_type_filter{"text/html"};
    std::size_t body_cap = 16u << 20;
};

inline constexpr std::string_view kMockServerHeader = "clawtrap-mock";

/// Media-type filter check; entries may be `type/*` or `*/*`. A response without a
/// Content-Type never passes.
bool content_type_allowed(const ResponseEnvelope& response, const std::vector<std::string>& filter);

/// Offset of the last case-insensitive `</body>`, or npos.
std::size_t find_last_closing_body(std::string_view text);

TransformResult apply_replace(ResponseEnvelope response, const Snippet& snippet,
                              const TransformOptions& options = {});

/// Inserts the snippet before the last `</body>`, or appends it when there is none.
TransformResult apply_inject(ResponseEnvelope response, const Snippet& snippet,
                             InsertionPoint point = InsertionPoint::before_closing_body,
                             const TransformOptions& options = {});

/// Applies the pairs in order; each pair replaces all non-overlapping matches left to right.
TransformResult apply_substitute(ResponseEnvelope response, std::span<const CompiledSubstitution> subs,
                                 const TransformOptions& options = {});

/// Synthesized local response; never touches the network.
ResponseEnvelope make_mock_response(const MockAction& action, const Snippet& snippet);

/// Runs a transform rule's attack against an upstream response.
TransformResult apply_attack(ResponseEnvelope response, const CompiledRule& rule, const SnippetMap& snippets,
                             std::size_t body_cap);

}  // namespace clawtrap
