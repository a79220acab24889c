#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clawtrap {

/// A named forged payload. The body may be empty.
struct Snippet {
    std::string name;
    std::string body;
    std::string content_type;

    bool operator==(const Snippet&) const = default;
};

using SnippetMap = std::map<std::string, Snippet, std::less<>>;

class SnippetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

bool is_valid_snippet_name(std::string_view name);

/// .html -> text/html, .json -> application/json, anything else -> application/octet-stream.
std::string infer_content_type(const std::filesystem::path& file);

/// Loads every regular file of a flat directory; the snippet name is the filename without
/// its last extension. Dotfiles and subdirectories are ignored. Throws SnippetError on
/// unreadable files, invalid names, or two files sharing a name.
SnippetMap load_snippets(const std::filesystem::path& dir);

}  // namespace clawtrap
