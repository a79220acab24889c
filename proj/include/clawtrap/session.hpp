#pragma once

#include "clawtrap/config.hpp"
#include "clawtrap/flow.hpp"
#include "clawtrap/http.hpp"
#include "clawtrap/matcher.hpp"
#include "clawtrap/snippets.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

/// One recorded exchange: the request as the proxy saw it and what upstream answered.
/// `upstream_error` stands in for the response when the recorded upstream failed.
struct SessionEntry {
    RequestSummary request;
    std::string request_body;
    std::optional<ResponseEnvelope> response;
    std::optional<FlowError> upstream_error;
};

struct RecordedSession {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<SessionEntry> entries;
};

class SessionError : public std::runtime_error {
public:
    SessionError(const std::string& message, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::optional<FlowError> flow_error_from_string(std::string_view text);

/// Newline-delimited JSON: an optional {"kind":"meta", ...} line, then one
/// {"kind":"entry","request":{...},"response":{...}} line per exchange. Bodies are base64.
RecordedSession parse_session(std::string_view text);
std::string serialize_session(const RecordedSession& session);
/// Throws std::system_error when unreadable, SessionError when malformed.
RecordedSession load_session_file(const std::filesystem::path& path);

nlohmann::json response_to_json(const ResponseEnvelope& response);

struct ReplayOutput {
    std::vector<ResponseEnvelope> responses;
    std::vector<std::string> response_lines;  // one JSON object per entry
    std::vector<std::string> audit_lines;     // the session's audit log
};

/// Runs every entry through the flow pipeline in order, with the recorded upstream
/// response standing in for the network and timestamps set to entry indices.
ReplayOutput replay_session(const RecordedSession& session, const GlobalConfig& config, const SnippetMap& snippets);

}  // namespace clawtrap
