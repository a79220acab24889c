#pragma once

#include "clawtrap/audit.hpp"
#include "clawtrap/config.hpp"
#include "clawtrap/matcher.hpp"
#include "clawtrap/snippets.hpp"
#include "clawtrap/validate.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

/// Immutable view of everything a flow needs to decide what to do. A flow takes one
/// snapshot before matching and uses it for its whole lifetime.
struct RuntimeSnapshot {
    std::uint64_t generation = 1;  // bumped by every accepted reload
    std::uint64_t version = 1;     // bumped by every mutation
    std::shared_ptr<const GlobalConfig> config;
    std::shared_ptr<const CompiledRuleSet> rules;  // enabled flags already reflect overrides
    std::shared_ptr<const SnippetMap> snippets;
    bool force_off = false;
    std::map<std::string, bool, std::less<>> overrides;
};

struct RuleState {
    std::string id;
    RuleClass rule_class;
    bool configured_enabled;
    std::optional<bool> override_enabled;
    bool effective_enabled;
};

inline constexpr std::string_view kAllRulesTarget = "all";

class SharedRuntimeState {
public:
    /// Throws PatternError when the rules do not compile (validate first).
    SharedRuntimeState(GlobalConfig config, SnippetMap snippets, AuditLog* audit = nullptr,
                       std::filesystem::path config_dir = {});

    std::shared_ptr<const RuntimeSnapshot> snapshot() const;

    enum class ModeStatus { ok, unknown_rule };

    /// `target` is a rule id or "all" (the kill switch: enabled=false forces passthrough).
    ModeStatus set_mode(std::string_view target, bool enabled);

    /// Parses, validates and swaps in a new config. Rules and snippets change together;
    /// on any error the current state is kept. Per-rule overrides are reset.
    ValidationReport reload(std::string_view config_bytes);
    ValidationReport reload(GlobalConfig config);

    std::vector<RuleState> rule_states() const;
    nlohmann::json describe() const;

private:
    std::shared_ptr<const RuntimeSnapshot> build(std::shared_ptr<const GlobalConfig> config,
                                                 std::shared_ptr<const SnippetMap> snippets,
                                                 std::map<std::string, bool, std::less<>> overrides,
                                                 bool force_off, std::uint64_t generation,
                                                 std::uint64_t version) const;
    void publish(std::shared_ptr<const RuntimeSnapshot> next);

    std::shared_ptr<const RuntimeSnapshot> current_;
    std::mutex owner_mu_;  // serializes mutations; readers never take it
    AuditLog* audit_;
    std::filesystem::path config_dir_;
};

}  // namespace clawtrap
