#include "clawtrap/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace clawtrap {

using nlohmann::json;

std::string_view to_string(AttackMode mode) {
    switch (mode) {
        case AttackMode::replace: return "replace";
        case AttackMode::inject: return "inject";
        case AttackMode::substitute: return "substitute";
    }
    return "unknown";
}

std::string_view to_string(RuleClass cls) {
    switch (cls) {
        case RuleClass::detection: return "detection";
        case RuleClass::mock: return "mock";
        case RuleClass::transform: return "transform";
    }
    return "unknown";
}

bool MatchSpec::empty() const {
    return !host && !path && !methods && !destination_ip && !header_contains;
}

std::optional<std::string> Rule::snippet_ref() const {
    if (const auto* mock = std::get_if<MockAction>(&action)) return mock->snippet;
    if (const auto* attack = std::get_if<AttackAction>(&action)) {
        if (attack->mode != AttackMode::substitute) return attack->snippet;
    }
    return std::nullopt;
}

const Rule* RuleSet::find(std::string_view id) const {
    for (const auto* list : {&detection, &mock, &transform}) {
        for (const auto& rule : *list) {
            if (rule.id == id) return &rule;
        }
    }
    return nullptr;
}

ParseError::ParseError(std::string message, std::string field, std::size_t line, std::size_t column)
    : std::runtime_error(std::move(message)), field_(std::move(field)), line_(line), column_(column) {}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ParseError(path.empty() ? message : path + ": " + message, path.empty() ? "/" : path);
}

std::string join(const std::string& path, std::string_view key) {
    return path + "/" + std::string(key);
}

std::string join(const std::string& path, std::size_t index) {
    return path + "/" + std::to_string(index);
}

void require_object(const json& value, const std::string& path) {
    if (!value.is_object()) fail(path, "expected an object");
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto name : allowed) known = known || key == name;
        if (!known) fail(join(path, key), "unknown key '" + key + "'");
    }
}

std::optional<std::string> opt_string(const json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_string()) fail(join(path, key), "expected a string");
    return it->get<std::string>();
}

std::string req_string(const json& obj, const std::string& path, std::string_view key) {
    auto value = opt_string(obj, path, key);
    if (!value) fail(join(path, key), "missing required field");
    return *value;
}

std::optional<bool> opt_bool(const json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_boolean()) fail(join(path, key), "expected a boolean");
    return it->get<bool>();
}

template <typename Int>
std::optional<Int> opt_uint(const json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_number_unsigned()) fail(join(path, key), "expected a non-negative integer");
    const auto raw = it->get<std::uint64_t>();
    if (raw > std::numeric_limits<Int>::max()) fail(join(path, key), "value out of range");
    return static_cast<Int>(raw);
}

std::vector<std::string> string_list(const json& value, const std::string& path) {
    if (!value.is_array()) fail(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_string()) fail(join(path, i), "expected a string");
        out.push_back(value[i].get<std::string>());
    }
    return out;
}

HostPort req_address(const json& obj, const std::string& path, std::string_view key) {
    const auto text = req_string(obj, path, key);
    auto parsed = parse_host_port(text);
    if (!parsed) fail(join(path, key), "expected host:port, got '" + text + "'");
    return *parsed;
}

MatchSpec parse_match(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"host", "path", "method", "destination_ip", "header_contains"});
    MatchSpec spec;
    spec.host = opt_string(value, path, "host");
    spec.path = opt_string(value, path, "path");
    spec.destination_ip = opt_string(value, path, "destination_ip");
    if (const auto it = value.find("method"); it != value.end()) {
        if (it->is_string()) {
            spec.methods = std::vector<std::string>{it->get<std::string>()};
        } else {
            spec.methods = string_list(*it, join(path, "method"));
        }
    }
    if (const auto it = value.find("header_contains"); it != value.end()) {
        const auto list_path = join(path, "header_contains");
        if (!it->is_array()) fail(list_path, "expected an array");
        std::vector<HeaderCondition> conditions;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto item_path = join(list_path, i);
            const auto& item = (*it)[i];
            require_object(item, item_path);
            check_keys(item, item_path, {"name", "contains"});
            conditions.push_back({req_string(item, item_path, "name"), req_string(item, item_path, "contains")});
        }
        spec.header_contains = std::move(conditions);
    }
    return spec;
}

AttackMode parse_mode(const std::string& text, const std::string& path) {
    if (text == "replace") return AttackMode::replace;
    if (text == "inject") return AttackMode::inject;
    if (text == "substitute") return AttackMode::substitute;
    fail(path, "unknown attack mode '" + text + "' (expected replace, inject or substitute)");
}

AttackAction parse_attack(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"mode", "snippet", "insertion", "substitutions", "content_type_filter"});
    AttackAction action;
    action.mode = parse_mode(req_string(value, path, "mode"), join(path, "mode"));
    action.snippet = opt_string(value, path, "snippet").value_or("");
    if (auto insertion = opt_string(value, path, "insertion")) {
        if (*insertion != "before-closing-body") {
            fail(join(path, "insertion"), "unknown insertion point '" + *insertion + "'");
        }
    }
    if (const auto it = value.find("substitutions"); it != value.end()) {
        const auto list_path = join(path, "substitutions");
        if (!it->is_array()) fail(list_path, "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto item_path = join(list_path, i);
            const auto& item = (*it)[i];
            require_object(item, item_path);
            check_keys(item, item_path, {"pattern", "replacement", "regex"});
            action.substitutions.push_back({req_string(item, item_path, "pattern"),
                                            req_string(item, item_path, "replacement"),
                                            opt_bool(item, item_path, "regex").value_or(false)});
        }
    }
    if (const auto it = value.find("content_type_filter"); it != value.end()) {
        action.content_type_filter = string_list(*it, join(path, "content_type_filter"));
    }
    return action;
}

MockAction parse_mock(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"snippet", "status", "content_type"});
    MockAction action;
    action.snippet = req_string(value, path, "snippet");
    if (const auto it = value.find("status"); it != value.end()) {
        if (!it->is_number_integer()) fail(join(path, "status"), "expected an integer");
        const auto status = it->get<std::int64_t>();
        if (status < -1'000'000 || status > 1'000'000) fail(join(path, "status"), "value out of range");
        action.status = static_cast<int>(status);
    }
    action.content_type = opt_string(value, path, "content_type");
    return action;
}

DetectAction parse_detect(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"category"});
    DetectAction action;
    if (auto category = opt_string(value, path, "category")) action.category = *category;
    return action;
}

Rule parse_rule(const json& value, const std::string& path, RuleClass cls) {
    require_object(value, path);
    check_keys(value, path, {"id", "enabled", "match", "action"});
    Rule rule;
    rule.id = req_string(value, path, "id");
    rule.enabled = opt_bool(value, path, "enabled").value_or(true);
    const auto match = value.find("match");
    if (match == value.end()) fail(join(path, "match"), "missing required field");
    rule.match = parse_match(*match, join(path, "match"));
    const auto action = value.find("action");
    switch (cls) {
        case RuleClass::detection:
            rule.action = action == value.end() ? DetectAction{} : parse_detect(*action, join(path, "action"));
            break;
        case RuleClass::mock:
            if (action == value.end()) fail(join(path, "action"), "missing required field");
            rule.action = parse_mock(*action, join(path, "action"));
            break;
        case RuleClass::transform:
            if (action == value.end()) fail(join(path, "action"), "missing required field");
            rule.action = parse_attack(*action, join(path, "action"));
            break;
    }
    return rule;
}

RuleSet parse_rules(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"detection", "mock", "transform"});
    RuleSet rules;
    std::set<std::string> seen;
    const std::pair<RuleClass, std::vector<Rule>*> lists[] = {
        {RuleClass::detection, &rules.detection},
        {RuleClass::mock, &rules.mock},
        {RuleClass::transform, &rules.transform},
    };
    for (const auto& [cls, out] : lists) {
        const auto key = to_string(cls);
        const auto it = value.find(key);
        if (it == value.end()) continue;
        const auto list_path = join(path, key);
        if (!it->is_array()) fail(list_path, "expected an array of rules");
        for (std::size_t i = 0; i < it->size(); ++i) {
            auto rule = parse_rule((*it)[i], join(list_path, i), cls);
            if (!rule.id.empty() && !seen.insert(rule.id).second) {
                fail(join(join(list_path, i), "id"), "duplicate rule id '" + rule.id + "'");
            }
            out->push_back(std::move(rule));
        }
    }
    return rules;
}

TlsPolicy parse_tls(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path,
               {"mode", "ca_cert_path", "ca_key_path", "intercept_hosts", "upstream_ca_path", "upstream_verify"});
    TlsPolicy tls;
    if (auto mode = opt_string(value, path, "mode")) {
        if (*mode == "tunnel-only") {
            tls.mode = TlsMode::tunnel_only;
        } else if (*mode == "intercept") {
            tls.mode = TlsMode::intercept;
        } else {
            fail(join(path, "mode"), "unknown TLS mode '" + *mode + "'");
        }
    }
    tls.ca_cert_path = opt_string(value, path, "ca_cert_path").value_or("");
    tls.ca_key_path = opt_string(value, path, "ca_key_path").value_or("");
    if (const auto it = value.find("intercept_hosts"); it != value.end()) {
        tls.intercept_hosts = string_list(*it, join(path, "intercept_hosts"));
    }
    tls.upstream_ca_path = opt_string(value, path, "upstream_ca_path").value_or("");
    tls.upstream_verify = opt_bool(value, path, "upstream_verify").value_or(true);
    return tls;
}

Limits parse_limits(const json& value, const std::string& path) {
    require_object(value, path);
    check_keys(value, path, {"body_cap_bytes", "max_response_bytes", "connect_timeout_ms", "exchange_timeout_ms"});
    Limits limits;
    if (auto v = opt_uint<std::uint64_t>(value, path, "body_cap_bytes")) limits.body_cap_bytes = *v;
    if (auto v = opt_uint<std::uint64_t>(value, path, "max_response_bytes")) limits.max_response_bytes = *v;
    if (auto v = opt_uint<std::uint32_t>(value, path, "connect_timeout_ms")) limits.connect_timeout_ms = *v;
    if (auto v = opt_uint<std::uint32_t>(value, path, "exchange_timeout_ms")) limits.exchange_timeout_ms = *v;
    return limits;
}

std::string resolve_path(const std::string& raw, const std::filesystem::path& base_dir) {
    if (raw.empty() || base_dir.empty()) return raw;
    std::filesystem::path p(raw);
    if (p.is_absolute()) return raw;
    return (base_dir / p).lexically_normal().string();
}

std::pair<std::size_t, std::size_t> line_column(std::string_view raw, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < raw.size(); ++i) {
        if (raw[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace

GlobalConfig parse_config(std::string_view raw, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(raw.begin(), raw.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(raw, e.byte);
        throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + e.what(),
                         "/", line, column);
    }

    const std::string root;
    require_object(doc, root);
    check_keys(doc, root,
               {"listen_address", "control_address", "honey_address", "active_mode", "rules", "snippet_dir",
                "audit_path", "report_store_path", "tls", "limits", "resolve"});

    GlobalConfig config;
    config.listen_address = req_address(doc, root, "listen_address");
    config.control_address = req_address(doc, root, "control_address");
    config.honey_address = req_address(doc, root, "honey_address");
    if (auto mode = opt_string(doc, root, "active_mode")) {
        if (*mode == "rules-as-configured") {
            config.active_mode = ActiveMode::rules_as_configured;
        } else if (*mode == "force-off") {
            config.active_mode = ActiveMode::force_off;
        } else {
            fail("/active_mode", "unknown mode '" + *mode + "' (expected rules-as-configured or force-off)");
        }
    }
    if (const auto it = doc.find("rules"); it != doc.end()) config.rules = parse_rules(*it, "/rules");
    if (auto dir = opt_string(doc, root, "snippet_dir")) config.snippet_dir = *dir;
    if (auto path = opt_string(doc, root, "audit_path")) config.audit_path = *path;
    if (auto path = opt_string(doc, root, "report_store_path")) config.report_store_path = *path;
    if (const auto it = doc.find("tls"); it != doc.end()) config.tls = parse_tls(*it, "/tls");
    if (const auto it = doc.find("limits"); it != doc.end()) config.limits = parse_limits(*it, "/limits");
    if (const auto it = doc.find("resolve"); it != doc.end()) {
        require_object(*it, "/resolve");
        for (const auto& [host, target] : it->items()) {
            if (!target.is_string()) fail(join("/resolve", host), "expected a string");
            config.resolve[normalize_host(host)] = target.get<std::string>();
        }
    }

    config.snippet_dir = resolve_path(config.snippet_dir, base_dir);
    config.audit_path = resolve_path(config.audit_path, base_dir);
    config.report_store_path = resolve_path(config.report_store_path, base_dir);
    config.tls.ca_cert_path = resolve_path(config.tls.ca_cert_path, base_dir);
    config.tls.ca_key_path = resolve_path(config.tls.ca_key_path, base_dir);
    config.tls.upstream_ca_path = resolve_path(config.tls.upstream_ca_path, base_dir);
    return config;
}

GlobalConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                                "cannot read config " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto base = std::filesystem::absolute(path).parent_path();
    return parse_config(buf.str(), base);
}

namespace {

json match_to_json(const MatchSpec& spec) {
    json out = json::object();
    if (spec.host) out["host"] = *spec.host;
    if (spec.path) out["path"] = *spec.path;
    if (spec.methods) out["method"] = *spec.methods;
    if (spec.destination_ip) out["destination_ip"] = *spec.destination_ip;
    if (spec.header_contains) {
        json list = json::array();
        for (const auto& c : *spec.header_contains) list.push_back({{"name", c.name}, {"contains", c.contains}});
        out["header_contains"] = std::move(list);
    }
    return out;
}

json action_to_json(const RuleAction& action) {
    return std::visit(
        [](const auto& a) -> json {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, DetectAction>) {
                return {{"category", a.category}};
            } else if constexpr (std::is_same_v<T, MockAction>) {
                json out = {{"snippet", a.snippet}, {"status", a.status}};
                if (a.content_type) out["content_type"] = *a.content_type;
                return out;
            } else {
                json out = {{"mode", to_string(a.mode)},
                            {"insertion", "before-closing-body"},
                            {"content_type_filter", a.content_type_filter}};
                if (a.mode != AttackMode::substitute || !a.snippet.empty()) out["snippet"] = a.snippet;
                json subs = json::array();
                for (const auto& s : a.substitutions) {
                    subs.push_back({{"pattern", s.pattern}, {"replacement", s.replacement}, {"regex", s.regex}});
                }
                out["substitutions"] = std::move(subs);
                return out;
            }
        },
        action);
}

json rules_to_json(const std::vector<Rule>& rules) {
    json list = json::array();
    for (const auto& rule : rules) {
        list.push_back({{"id", rule.id},
                        {"enabled", rule.enabled},
                        {"match", match_to_json(rule.match)},
                        {"action", action_to_json(rule.action)}});
    }
    return list;
}

}  // namespace

std::string serialize_config(const GlobalConfig& config) {
    json doc = {
        {"listen_address", config.listen_address.to_string()},
        {"control_address", config.control_address.to_string()},
        {"honey_address", config.honey_address.to_string()},
        {"active_mode", config.active_mode == ActiveMode::force_off ? "force-off" : "rules-as-configured"},
        {"rules",
         {{"detection", rules_to_json(config.rules.detection)},
          {"mock", rules_to_json(config.rules.mock)},
          {"transform", rules_to_json(config.rules.transform)}}},
        {"snippet_dir", config.snippet_dir},
        {"audit_path", config.audit_path},
        {"report_store_path", config.report_store_path},
        {"tls",
         {{"mode", config.tls.mode == TlsMode::intercept ? "intercept" : "tunnel-only"},
          {"ca_cert_path", config.tls.ca_cert_path},
          {"ca_key_path", config.tls.ca_key_path},
          {"intercept_hosts", config.tls.intercept_hosts},
          {"upstream_ca_path", config.tls.upstream_ca_path},
          {"upstream_verify", config.tls.upstream_verify}}},
        {"limits",
         {{"body_cap_bytes", config.limits.body_cap_bytes},
          {"max_response_bytes", config.limits.max_response_bytes},
          {"connect_timeout_ms", config.limits.connect_timeout_ms},
          {"exchange_timeout_ms", config.limits.exchange_timeout_ms}}},
        {"resolve", config.resolve},
    };
    return doc.dump(2) + "\n";
}

}  // namespace clawtrap
