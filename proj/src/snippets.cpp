#include "clawtrap/snippets.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace clawtrap {

bool is_valid_snippet_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '.' || c == '_' || c == '-';
    });
}

std::string infer_content_type(const std::filesystem::path& file) {
    const auto ext = file.extension().string();
    if (ext == ".html") return "text/html";
    if (ext == ".json") return "application/json";
    return "application/octet-stream";
}

SnippetMap load_snippets(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw SnippetError("snippet directory not found: " + dir.string());

    std::map<std::string, std::vector<fs::path>> by_name;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        const auto& entry = *it;
        const auto filename = entry.path().filename().string();
        if (filename.empty() || filename.front() == '.') continue;
        if (!entry.is_regular_file(ec)) continue;
        by_name[entry.path().stem().string()].push_back(entry.path());
    }
    if (ec) throw SnippetError("cannot list snippet directory " + dir.string() + ": " + ec.message());

    std::vector<std::string> ambiguous;
    for (const auto& [name, files] : by_name) {
        if (files.size() > 1) ambiguous.push_back(name);
    }
    if (!ambiguous.empty()) {
        std::string names;
        for (const auto& n : ambiguous) names += (names.empty() ? "" : ", ") + n;
        throw SnippetError("ambiguous snippet name(s): " + names);
    }

    SnippetMap snippets;
    for (const auto& [name, files] : by_name) {
        if (!is_valid_snippet_name(name)) throw SnippetError("invalid snippet name: " + name);
        std::ifstream in(files.front(), std::ios::binary);
        if (!in) throw SnippetError("cannot read snippet " + files.front().string());
        std::ostringstream body;
        body << in.rdbuf();
        if (in.bad()) throw SnippetError("cannot read snippet " + files.front().string());
        snippets.emplace(name, Snippet{name, std::move(body).str(), infer_content_type(files.front())});
    }
    return snippets;
}

}  // namespace clawtrap
