#pragma once

// Reference implementations written directly from the rule semantics, without sharing
// code with the library. Deliberately simple and slow.

#include "clawtrap/config.hpp"
#include "clawtrap/matcher.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clawtrap::testing::oracle {

/// Recursive wildcard match of one host label.
bool label_glob(const std::string& pattern, const std::string& label);
bool host_matches(const std::string& pattern, const std::string& host);

std::optional<std::uint32_t> parse_ipv4(const std::string& text);
/// IPv4 only: `a.b.c.d` or `a.b.c.d/n`, compared with plain integer masking.
bool cidr_contains_v4(const std::string& cidr, const std::string& ip);

bool spec_matches(const MatchSpec& spec, const RequestSummary& req);
MatchOutcome evaluate(const RequestSummary& req, const RuleSet& rules);

/// Literal substitution by scanning left to right and splicing, pair by pair.
std::pair<std::string, std::size_t> substitute_literal(std::string body,
                                                       const std::vector<std::pair<std::string, std::string>>& pairs);

/// Every offset where `</body>` occurs, compared case-insensitively character by character.
std::vector<std::size_t> closing_body_positions(const std::string& text);

}  // namespace clawtrap::testing::oracle
