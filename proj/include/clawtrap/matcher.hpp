#pragma once

#include "clawtrap/clock.hpp"
#include "clawtrap/config.hpp"
#include "clawtrap/http.hpp"
#include "clawtrap/net.hpp"
#include "clawtrap/patterns.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clawtrap {

enum class Scheme { http, https };

std::string_view to_string(Scheme scheme);

/// What the matcher sees of an intercepted request. `host` is lowercase and `path`
/// (path plus query) starts with '/'.
struct RequestSummary {
    std::string method;
    Scheme scheme = Scheme::http;
    std::string host;
    std::uint16_t port = 80;
    std::string path = "/";
    std::optional<IpAddress> destination_ip;
    HeaderList headers;
    Timestamp received_at;
};

struct MatchOutcome {
    std::vector<std::string> detections;
    std::optional<std::string> mock;
    std::optional<std::string> transform;

    bool empty() const { return detections.empty() && !mock && !transform; }
    bool operator==(const MatchOutcome&) const = default;
};

/// MatchSpec with every pattern pre-compiled.
class CompiledMatch {
public:
    /// Throws PatternError for any pattern that does not compile.
    static CompiledMatch compile(const MatchSpec& spec);

    bool uses_destination_ip() const { return destination_.has_value(); }

private:
    friend bool matches(const CompiledMatch& spec, const RequestSummary& req);

    std::optional<HostGlob> host_;
    std::optional<std::string> path_prefix_;
    std::optional<boost::regex> path_regex_;
    std::optional<std::vector<std::string>> methods_;
    std::optional<CidrBlock> destination_;
    std::vector<HeaderCondition> headers_;
};

bool matches(const CompiledMatch& spec, const RequestSummary& req);

struct CompiledRule {
    Rule rule;
    CompiledMatch match;
    std::vector<CompiledSubstitution> substitutions;  // transform rules in substitute mode
};

class CompiledRuleSet {
public:
    /// Throws PatternError; callers validate first.
    static std::shared_ptr<const CompiledRuleSet> compile(const RuleSet& rules);

    std::span<const CompiledRule> detection() const { return detection_; }
    std::span<const CompiledRule> mock() const { return mock_; }
    std::span<const CompiledRule> transform() const { return transform_; }
    const CompiledRule* find(std::string_view id) const;
    bool uses_destination_ip() const { return uses_destination_ip_; }
    std::size_t size() const { return detection_.size() + mock_.size() + transform_.size(); }

private:
    std::vector<CompiledRule> detection_;
    std::vector<CompiledRule> mock_;
    std::vector<CompiledRule> transform_;
    bool uses_destination_ip_ = false;
};

/// Detection rules all fire; the first enabled mock wins; a transform is picked only
/// when no mock matched.
MatchOutcome match_request(const RequestSummary& req, const CompiledRuleSet& rules);

}  // namespace clawtrap
