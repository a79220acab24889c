#pragma once

#include "clawtrap/config.hpp"
#include "clawtrap/snippets.hpp"

#include <string>
#include <vector>

namespace clawtrap {

struct Diagnostic {
    std::string rule_id;  // empty for config-level findings
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

struct ValidationReport {
    std::vector<Diagnostic> errors;
    std::vector<Diagnostic> warnings;

    bool ok() const { return errors.empty(); }
    /// Human-readable listing ending with an "N errors, M warnings" summary line.
    std::string to_text() const;
    std::string to_json() const;
};

/// Checks every config invariant. Snippets are loaded from config.snippet_dir.
ValidationReport validate(const GlobalConfig& config);

/// Same checks against an already loaded snippet map (snippet_dir is still required to exist).
ValidationReport validate(const GlobalConfig& config, const SnippetMap& snippets);

}  // namespace clawtrap
