#pragma once

// Small builders shared by the unit tests.

#include "clawtrap/config.hpp"
#include "clawtrap/snippets.hpp"

#include <string>

namespace clawtrap::testing {

/// Loopback addresses on ephemeral ports, no rules, the given snippet directory.
inline GlobalConfig base_config(const std::string& snippet_dir) {
    GlobalConfig config;
    config.listen_address = {"127.0.0.1", 0};
    config.control_address = {"127.0.0.1", 0};
    config.honey_address = {"127.0.0.1", 0};
    config.snippet_dir = snippet_dir;
    return config;
}

inline Rule make_rule(std::string id, MatchSpec match, RuleAction action, bool enabled = true) {
    Rule rule;
    rule.id = std::move(id);
    rule.match = std::move(match);
    rule.action = std::move(action);
    rule.enabled = enabled;
    return rule;
}

inline MatchSpec host_spec(std::string host) {
    MatchSpec spec;
    spec.host = std::move(host);
    return spec;
}

inline AttackAction inject_action(std::string snippet) {
    AttackAction a;
    a.mode = AttackMode::inject;
    a.snippet = std::move(snippet);
    return a;
}

inline AttackAction replace_action(std::string snippet) {
    AttackAction a;
    a.mode = AttackMode::replace;
    a.snippet = std::move(snippet);
    return a;
}

inline Snippet html_snippet(std::string name, std::string body) {
    return Snippet{std::move(name), std::move(body), "text/html"};
}

}  // namespace clawtrap::testing
