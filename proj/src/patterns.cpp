#include "clawtrap/patterns.hpp"

namespace clawtrap {

boost::regex compile_regex(std::string_view pattern) {
    try {
        return boost::regex(pattern.begin(), pattern.end(), boost::regex::perl);
    } catch (const boost::regex_error& e) {
        throw PatternError("invalid regex '" + std::string(pattern) + "': " + e.what());
    }
}

std::vector<CompiledSubstitution> compile_substitutions(const std::vector<Substitution>& subs) {
    std::vector<CompiledSubstitution> out;
    out.reserve(subs.size());
    for (const auto& s : subs) {
        if (s.pattern.empty()) throw PatternError("empty substitution pattern");
        CompiledSubstitution compiled{s, std::nullopt};
        if (s.regex) compiled.regex = compile_regex(s.pattern);
        out.push_back(std::move(compiled));
    }
    return out;
}

}  // namespace clawtrap
