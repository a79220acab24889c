#include "clawtrap/runtime_state.hpp"

#include <atomic>

namespace clawtrap {

using nlohmann::json;

SharedRuntimeState::SharedRuntimeState(GlobalConfig config, SnippetMap snippets, AuditLog* audit,
                                       std::filesystem::path config_dir)
    : audit_(audit), config_dir_(std::move(config_dir)) {
    const bool force_off = config.active_mode == ActiveMode::force_off;
    current_ = build(std::make_shared<const GlobalConfig>(std::move(config)),
                     std::make_shared<const SnippetMap>(std::move(snippets)), {}, force_off, 1, 1);
}

std::shared_ptr<const RuntimeSnapshot> SharedRuntimeState::snapshot() const {
    return std::atomic_load(&current_);
}

void SharedRuntimeState::publish(std::shared_ptr<const RuntimeSnapshot> next) {
    std::atomic_store(&current_, std::move(next));
}

std::shared_ptr<const RuntimeSnapshot> SharedRuntimeState::build(std::shared_ptr<const GlobalConfig> config,
                                                                 std::shared_ptr<const SnippetMap> snippets,
                                                                 std::map<std::string, bool, std::less<>> overrides,
                                                                 bool force_off, std::uint64_t generation,
                                                                 std::uint64_t version) const {
    RuleSet effective = config->rules;
    for (auto* list : {&effective.detection, &effective.mock, &effective.transform}) {
        for (auto& rule : *list) {
            if (const auto it = overrides.find(rule.id); it != overrides.end()) rule.enabled = it->second;
        }
    }
    auto snap = std::make_shared<RuntimeSnapshot>();
    snap->generation = generation;
    snap->version = version;
    snap->config = std::move(config);
    snap->rules = CompiledRuleSet::compile(effective);
    snap->snippets = std::move(snippets);
    snap->force_off = force_off;
    snap->overrides = std::move(overrides);
    return snap;
}

SharedRuntimeState::ModeStatus SharedRuntimeState::set_mode(std::string_view target, bool enabled) {
    std::lock_guard lock(owner_mu_);
    const auto cur = snapshot();
    auto overrides = cur->overrides;
    bool force_off = cur->force_off;
    if (target == kAllRulesTarget) {
        force_off = !enabled;
    } else {
        if (!cur->config->rules.find(target)) return ModeStatus::unknown_rule;
        overrides[std::string(target)] = enabled;
    }
    publish(build(cur->config, cur->snippets, std::move(overrides), force_off, cur->generation, cur->version + 1));
    if (audit_) {
        audit_->append(AuditKind::mode_changed, {{"target", target},
                                                 {"enabled", enabled},
                                                 {"force_off", force_off},
                                                 {"generation", cur->generation}});
    }
    return ModeStatus::ok;
}

ValidationReport SharedRuntimeState::reload(std::string_view config_bytes) {
    try {
        return reload(parse_config(config_bytes, config_dir_));
    } catch (const ParseError& e) {
        ValidationReport report;
        report.errors.push_back({"", e.what()});
        return report;
    }
}

ValidationReport SharedRuntimeState::reload(GlobalConfig config) {
    SnippetMap snippets;
    try {
        snippets = load_snippets(config.snippet_dir);
    } catch (const SnippetError& e) {
        ValidationReport report;
        report.errors.push_back({"", e.what()});
        return report;
    }
    auto report = validate(config, snippets);
    if (!report.ok()) return report;

    std::lock_guard lock(owner_mu_);
    const auto cur = snapshot();
    const auto& old = *cur->config;
    if (!(old.listen_address == config.listen_address) || !(old.control_address == config.control_address) ||
        !(old.honey_address == config.honey_address) || old.audit_path != config.audit_path ||
        old.report_store_path != config.report_store_path || !(old.tls == config.tls)) {
        report.warnings.push_back({"", "listener, storage and tls settings only take effect after a restart"});
    }
    const auto old_count = old.rules.size();
    const auto new_count = config.rules.size();
    publish(build(std::make_shared<const GlobalConfig>(std::move(config)),
                  std::make_shared<const SnippetMap>(std::move(snippets)), {}, cur->force_off,
                  cur->generation + 1, cur->version + 1));
    if (audit_) {
        audit_->append(AuditKind::config_reloaded, {{"old_generation", cur->generation},
                                                    {"new_generation", cur->generation + 1},
                                                    {"old_rule_count", old_count},
                                                    {"new_rule_count", new_count}});
    }
    return report;
}

namespace {

std::vector<RuleState> states_of(const RuntimeSnapshot& snapshot) {
    const auto* snap = &snapshot;
    std::vector<RuleState> out;
    const std::pair<RuleClass, const std::vector<Rule>*> lists[] = {
        {RuleClass::detection, &snap->config->rules.detection},
        {RuleClass::mock, &snap->config->rules.mock},
        {RuleClass::transform, &snap->config->rules.transform},
    };
    for (const auto& [cls, rules] : lists) {
        for (const auto& rule : *rules) {
            RuleState state{rule.id, cls, rule.enabled, std::nullopt, rule.enabled};
            if (const auto it = snap->overrides.find(rule.id); it != snap->overrides.end()) {
                state.override_enabled = it->second;
                state.effective_enabled = it->second;
            }
            if (snap->force_off) state.effective_enabled = false;
            out.push_back(std::move(state));
        }
    }
    return out;
}

}  // namespace

std::vector<RuleState> SharedRuntimeState::rule_states() const { return states_of(*snapshot()); }

json SharedRuntimeState::describe() const {
    const auto snap = snapshot();
    json rules = json::array();
    for (const auto& s : states_of(*snap)) {
        rules.push_back({{"id", s.id},
                         {"class", to_string(s.rule_class)},
                         {"configured_enabled", s.configured_enabled},
                         {"override", s.override_enabled ? json(*s.override_enabled) : json(nullptr)},
                         {"effective_enabled", s.effective_enabled}});
    }
    return {{"generation", snap->generation},
            {"version", snap->version},
            {"force_off", snap->force_off},
            {"rules", std::move(rules)}};
}

}  // namespace clawtrap
