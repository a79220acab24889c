#include "clawtrap/validate.hpp"

#include "clawtrap/patterns.hpp"
#include "clawtrap/tls.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace clawtrap {

namespace {

constexpr const char* kKnownMethods[] = {"GET", "HEAD", "POST", "PUT", "DELETE", "CONNECT",
                                         "OPTIONS", "TRACE", "PATCH"};

void check_match(const Rule& rule, ValidationReport& report) {
    const auto& spec = rule.match;
    auto error = [&](std::string msg) { report.errors.push_back({rule.id, std::move(msg)}); };
    if (spec.empty()) {
        error("empty match spec (use host \"*\" to match everything)");
        return;
    }
    if (spec.host && !HostGlob::compile(*spec.host)) error("invalid host pattern: " + *spec.host);
    if (spec.path) {
        if (spec.path->empty()) {
            error("empty path pattern");
        } else if (spec.path->front() == '^') {
            try {
                compile_regex(*spec.path);
            } catch (const PatternError& e) {
                error(e.what());
            }
        } else if (spec.path->front() != '/') {
            error("path prefix must start with '/': " + *spec.path);
        }
    }
    if (spec.methods) {
        if (spec.methods->empty()) error("empty method set");
        for (const auto& m : *spec.methods) {
            bool known = false;
            for (const char* k : kKnownMethods) known = known || iequals(m, k);
            if (!known) error("unknown HTTP method: " + m);
        }
    }
    if (spec.destination_ip && !CidrBlock::parse(*spec.destination_ip)) {
        error("invalid destination_ip: " + *spec.destination_ip);
    }
    if (spec.header_contains) {
        if (spec.header_contains->empty()) error("empty header_contains list");
        for (const auto& c : *spec.header_contains) {
            if (c.name.empty()) error("header_contains entry with empty header name");
        }
    }
}

void check_action(const Rule& rule, const SnippetMap& snippets, ValidationReport& report) {
    auto error = [&](std::string msg) { report.errors.push_back({rule.id, std::move(msg)}); };
    if (const auto* mock = std::get_if<MockAction>(&rule.action)) {
        if (mock->status < 100 || mock->status > 599) {
            error("mock status out of range 100-599: " + std::to_string(mock->status));
        }
    }
    if (const auto* attack = std::get_if<AttackAction>(&rule.action)) {
        if (attack->mode == AttackMode::substitute) {
            if (attack->substitutions.empty()) error("substitute action needs at least one substitution");
            try {
                compile_substitutions(attack->substitutions);
            } catch (const PatternError& e) {
                error(e.what());
            }
        } else if (attack->snippet.empty()) {
            error(std::string(to_string(attack->mode)) + " action needs a snippet");
        }
        if (attack->content_type_filter.empty()) error("empty content_type_filter");
        for (const auto& media : attack->content_type_filter) {
            if (media.find('/') == std::string::npos) error("invalid media type in filter: " + media);
        }
    }
    if (auto ref = rule.snippet_ref(); ref && !ref->empty() && !snippets.count(*ref)) {
        error("unresolved snippet: " + *ref);
    }
}

void check_addresses(const GlobalConfig& config, ValidationReport& report) {
    const std::pair<const char*, const HostPort*> addrs[] = {
        {"listen_address", &config.listen_address},
        {"control_address", &config.control_address},
        {"honey_address", &config.honey_address},
    };
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            const auto& a = *addrs[i].second;
            const auto& b = *addrs[j].second;
            // Port 0 asks the OS for an ephemeral port and can never collide.
            if (a.port != 0 && a == b) {
                report.errors.push_back({"", std::string(addrs[i].first) + " and " + addrs[j].first +
                                                 " must differ (" + a.to_string() + ")"});
            }
        }
    }
}

void check_tls(const TlsPolicy& tls, ValidationReport& report) {
    for (const auto& host : tls.intercept_hosts) {
        if (!HostGlob::compile(host)) report.errors.push_back({"", "invalid intercept host pattern: " + host});
    }
    if (tls.mode != TlsMode::intercept) return;
    if (tls.ca_cert_path.empty() || tls.ca_key_path.empty()) {
        report.errors.push_back({"", "tls intercept mode needs ca_cert_path and ca_key_path"});
        return;
    }
    if (auto problem = check_ca_files(tls.ca_cert_path, tls.ca_key_path)) {
        report.errors.push_back({"", *problem});
    }
}

void check_resolve(const GlobalConfig& config, ValidationReport& report) {
    for (const auto& [host, target] : config.resolve) {
        if (!IpAddress::parse(target) && !parse_host_port(target)) {
            report.errors.push_back({"", "resolve entry for " + host + " must be ip or ip:port: " + target});
        } else if (auto hp = parse_host_port(target); hp && !IpAddress::parse(hp->host)) {
            report.errors.push_back({"", "resolve entry for " + host + " must use an IP address: " + target});
        }
    }
}

}  // namespace

std::string ValidationReport::to_text() const {
    std::string out;
    auto line = [&](const char* level, const Diagnostic& d) {
        out += level;
        out += ": ";
        if (!d.rule_id.empty()) out += "[" + d.rule_id + "] ";
        out += d.message + "\n";
    };
    for (const auto& d : errors) line("error", d);
    for (const auto& d : warnings) line("warning", d);
    out += std::to_string(errors.size()) + (errors.size() == 1 ? " error, " : " errors, ") +
           std::to_string(warnings.size()) + (warnings.size() == 1 ? " warning\n" : " warnings\n");
    return out;
}

std::string ValidationReport::to_json() const {
    auto list = [](const std::vector<Diagnostic>& ds) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& d : ds) {
            nlohmann::json item = {{"message", d.message}};
            if (!d.rule_id.empty()) item["rule_id"] = d.rule_id;
            out.push_back(std::move(item));
        }
        return out;
    };
    return nlohmann::json{{"ok", ok()}, {"errors", list(errors)}, {"warnings", list(warnings)}}.dump();
}

ValidationReport validate(const GlobalConfig& config) {
    SnippetMap snippets;
    ValidationReport early;
    std::error_code ec;
    if (std::filesystem::is_directory(config.snippet_dir, ec)) {
        try {
            snippets = load_snippets(config.snippet_dir);
        } catch (const SnippetError& e) {
            early.errors.push_back({"", e.what()});
        }
    }
    auto report = validate(config, snippets);
    report.errors.insert(report.errors.begin(), early.errors.begin(), early.errors.end());
    return report;
}

ValidationReport validate(const GlobalConfig& config, const SnippetMap& snippets) {
    ValidationReport report;
    check_addresses(config, report);
    std::error_code ec;
    if (!std::filesystem::is_directory(config.snippet_dir, ec)) {
        report.errors.push_back({"", "snippet_dir is not a readable directory: " + config.snippet_dir});
    }

    std::set<std::string> ids;
    std::set<std::string> used_snippets;
    for (const auto* list : {&config.rules.detection, &config.rules.mock, &config.rules.transform}) {
        for (const auto& rule : *list) {
            if (rule.id.empty()) {
                report.errors.push_back({"", "rule with empty id"});
            } else if (rule.id == "all") {
                report.errors.push_back({rule.id, "rule id 'all' is reserved for the kill switch"});
            } else if (!ids.insert(rule.id).second) {
                report.errors.push_back({rule.id, "duplicate rule id: " + rule.id});
            }
            check_match(rule, report);
            check_action(rule, snippets, report);
            if (auto ref = rule.snippet_ref()) used_snippets.insert(*ref);
            if (!rule.enabled) report.warnings.push_back({rule.id, "rule disabled: " + rule.id});
        }
    }
    for (const auto& [name, _] : snippets) {
        if (!used_snippets.count(name)) report.warnings.push_back({"", "unused snippet: " + name});
    }
    check_tls(config.tls, report);
    check_resolve(config, report);
    return report;
}

}  // namespace clawtrap
