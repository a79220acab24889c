#include "clawtrap/matcher.hpp"

namespace clawtrap {

std::string_view to_string(Scheme scheme) { return scheme == Scheme::https ? "https" : "http"; }

CompiledMatch CompiledMatch::compile(const MatchSpec& spec) {
    CompiledMatch out;
    if (spec.host) {
        out.host_ = HostGlob::compile(*spec.host);
        if (!out.host_) throw PatternError("invalid host pattern: " + *spec.host);
    }
    if (spec.path) {
        if (!spec.path->empty() && spec.path->front() == '^') {
            out.path_regex_ = compile_regex(*spec.path);
        } else {
            out.path_prefix_ = *spec.path;
        }
    }
    if (spec.methods) {
        out.methods_.emplace();
        for (const auto& m : *spec.methods) out.methods_->push_back(to_lower(m));
    }
    if (spec.destination_ip) {
        out.destination_ = CidrBlock::parse(*spec.destination_ip);
        if (!out.destination_) throw PatternError("invalid destination_ip: " + *spec.destination_ip);
    }
    if (spec.header_contains) out.headers_ = *spec.header_contains;
    return out;
}

bool matches(const CompiledMatch& spec, const RequestSummary& req) {
    if (spec.host_ && !spec.host_->matches(req.host)) return false;
    if (spec.path_prefix_ && req.path.compare(0, spec.path_prefix_->size(), *spec.path_prefix_) != 0) return false;
    if (spec.path_regex_ && !boost::regex_search(req.path, *spec.path_regex_)) return false;
    if (spec.methods_) {
        const auto method = to_lower(req.method);
        bool any = false;
        for (const auto& m : *spec.methods_) any = any || m == method;
        if (!any) return false;
    }
    if (spec.destination_) {
        // Unknown connect target never matches an address constraint.
        if (!req.destination_ip || !spec.destination_->contains(*req.destination_ip)) return false;
    }
    for (const auto& cond : spec.headers_) {
        bool found = false;
        for (const auto& [name, value] : req.headers) {
            if (iequals(name, cond.name) && value.find(cond.contains) != std::string::npos) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

std::shared_ptr<const CompiledRuleSet> CompiledRuleSet::compile(const RuleSet& rules) {
    auto out = std::make_shared<CompiledRuleSet>();
    auto build = [&](const std::vector<Rule>& in, std::vector<CompiledRule>& dst) {
        for (const auto& rule : in) {
            CompiledRule compiled{rule, CompiledMatch::compile(rule.match), {}};
            if (const auto* attack = std::get_if<AttackAction>(&rule.action);
                attack && attack->mode == AttackMode::substitute) {
                compiled.substitutions = compile_substitutions(attack->substitutions);
            }
            out->uses_destination_ip_ = out->uses_destination_ip_ || compiled.match.uses_destination_ip();
            dst.push_back(std::move(compiled));
        }
    };
    build(rules.detection, out->detection_);
    build(rules.mock, out->mock_);
    build(rules.transform, out->transform_);
    return out;
}

const CompiledRule* CompiledRuleSet::find(std::string_view id) const {
    for (const auto* list : {&detection_, &mock_, &transform_}) {
        for (const auto& r : *list) {
            if (r.rule.id == id) return &r;
        }
    }
    return nullptr;
}

MatchOutcome match_request(const RequestSummary& req, const CompiledRuleSet& rules) {
    MatchOutcome outcome;
    for (const auto& r : rules.detection()) {
        if (r.rule.enabled && matches(r.match, req)) outcome.detections.push_back(r.rule.id);
    }
    for (const auto& r : rules.mock()) {
        if (r.rule.enabled && matches(r.match, req)) {
            outcome.mock = r.rule.id;
            return outcome;
        }
    }
    for (const auto& r : rules.transform()) {
        if (r.rule.enabled && matches(r.match, req)) {
            outcome.transform = r.rule.id;
            break;
        }
    }
    return outcome;
}

}  // namespace clawtrap
