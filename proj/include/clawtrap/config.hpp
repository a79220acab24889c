#pragma once

#include "clawtrap/net.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace clawtrap {

enum class AttackMode { replace, inject, substitute };
enum class InsertionPoint { before_closing_body };
enum class ActiveMode { rules_as_configured, force_off };
enum class TlsMode { tunnel_only, intercept };
enum class RuleClass { detection, mock, transform };

std::string_view to_string(AttackMode mode);
std::string_view to_string(RuleClass cls);

struct HeaderCondition {
    std::string name;
    std::string contains;

    bool operator==(const HeaderCondition&) const = default;
};

/// Conjunction of optional request constraints. Absent fields impose nothing.
struct MatchSpec {
    std::optional<std::string> host;                 // host glob
    std::optional<std::string> path;                 // prefix, or regex when it starts with '^'
    std::optional<std::vector<std::string>> methods;
    std::optional<std::string> destination_ip;       // literal or CIDR
    std::optional<std::vector<HeaderCondition>> header_contains;

    bool empty() const;
    bool operator==(const MatchSpec&) const = default;
};

struct Substitution {
    std::string pattern;
    std::string replacement;
    bool regex = false;

    bool operator==(const Substitution&) const = default;
};

struct AttackAction {
    AttackMode mode = AttackMode::replace;
    std::string snippet;  // replace, inject
    InsertionPoint insertion = InsertionPoint::before_closing_body;
    std::vector<Substitution> substitutions;  // substitute
    std::vector<std::string> content_type_filter{"text/html"};

    bool operator==(const AttackAction&) const = default;
};

struct MockAction {
    std::string snippet;
    int status = 200;
    std::optional<std::string> content_type;

    bool operator==(const MockAction&) const = default;
};

struct DetectAction {
    std::string category = "detection";

    bool operator==(const DetectAction&) const = default;
};

using RuleAction = std::variant<DetectAction, MockAction, AttackAction>;

struct Rule {
    std::string id;
    bool enabled = true;
    MatchSpec match;
    RuleAction action;

    /// Snippet name referenced by the action, if any.
    std::optional<std::string> snippet_ref() const;
    bool operator==(const Rule&) const = default;
};

struct RuleSet {
    std::vector<Rule> detection;
    std::vector<Rule> mock;
    std::vector<Rule> transform;

    std::size_t size() const { return detection.size() + mock.size() + transform.size(); }
    const Rule* find(std::string_view id) const;
    bool operator==(const RuleSet&) const = default;
};

struct TlsPolicy {
    TlsMode mode = TlsMode::tunnel_only;
    std::string ca_cert_path;
    std::string ca_key_path;
    std::vector<std::string> intercept_hosts;
    // Extra trust anchors for upstream TLS (PEM bundle); empty means system defaults only.
    std::string upstream_ca_path;
    bool upstream_verify = true;

    bool operator==(const TlsPolicy&) const = default;
};

struct Limits {
    std::uint64_t body_cap_bytes = 16ull << 20;
    std::uint64_t max_response_bytes = 256ull << 20;
    std::uint32_t connect_timeout_ms = 30'000;
    std::uint32_t exchange_timeout_ms = 120'000;

    bool operator==(const Limits&) const = default;
};

struct GlobalConfig {
    HostPort listen_address;
    HostPort control_address;
    HostPort honey_address;
    ActiveMode active_mode = ActiveMode::rules_as_configured;
    RuleSet rules;
    std::string snippet_dir = "snippets";
    std::string audit_path = "audit.jsonl";
    std::string report_store_path = "reports.jsonl";
    TlsPolicy tls;
    Limits limits;
    // Static name resolution: host -> "ip" or "ip:port". Bypasses DNS for these hosts.
    std::map<std::string, std::string> resolve;

    bool operator==(const GlobalConfig&) const = default;
};

/// Malformed syntax, wrong type or unknown key. `field` is a JSON pointer into the document.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::string field, std::size_t line = 0, std::size_t column = 0);

    const std::string& field() const { return field_; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::string field_;
    std::size_t line_;
    std::size_t column_;
};

/// Strict parse of config JSON. Relative paths are resolved against `base_dir` when it is
/// non-empty and kept verbatim otherwise.
GlobalConfig parse_config(std::string_view raw, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; relative paths resolve against the file's directory.
/// Throws std::system_error when the file cannot be read.
GlobalConfig load_config_file(const std::filesystem::path& path);

std::string serialize_config(const GlobalConfig& config);

}  // namespace clawtrap
