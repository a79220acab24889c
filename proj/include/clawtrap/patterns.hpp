#pragma once

#include "clawtrap/config.hpp"

#include <boost/regex.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

class PatternError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Perl-syntax regular expression; throws PatternError when it does not compile.
boost::regex compile_regex(std::string_view pattern);

struct CompiledSubstitution {
    Substitution spec;
    std::optional<boost::regex> regex;  // set when spec.regex
};

std::vector<CompiledSubstitution> compile_substitutions(const std::vector<Substitution>& subs);

}  // namespace clawtrap
