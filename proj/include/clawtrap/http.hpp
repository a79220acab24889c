#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clawtrap {

class BufferedReader;

/// Ordered header list; names compare case-insensitively.
using HeaderList = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> header_value(const HeaderList& headers, std::string_view name);
/// Replaces the first occurrence and drops any others; appends when absent.
void set_header(HeaderList& headers, std::string_view name, std::string value);
void remove_header(HeaderList& headers, std::string_view name);

struct ResponseEnvelope {
    int status = 200;
    std::string reason;
    HeaderList headers;
    std::string body;

    std::optional<std::string> content_type() const { return header_value(headers, "Content-Type"); }
    std::optional<std::string> content_encoding() const { return header_value(headers, "Content-Encoding"); }
    bool operator==(const ResponseEnvelope&) const = default;
};

/// Lowercased `type/subtype` with parameters stripped.
std::string media_type(std::string_view content_type);
std::optional<std::string> charset_param(std::string_view content_type);
std::string_view reason_phrase(int status);

struct RequestHead {
    std::string method;
    std::string target;
    std::string version;  // "HTTP/1.1"
    HeaderList headers;
};

enum class WireStatus { ok, closed, malformed, too_large, timeout };

inline constexpr std::size_t kMaxHeaderBytes = 64 * 1024;

WireStatus read_request_head(BufferedReader& in, RequestHead& head);
WireStatus read_request_body(BufferedReader& in, const HeaderList& headers, std::size_t max_bytes,
                             std::string& body);
/// Reads one final (non-1xx) response. The body is de-chunked; `request_method` decides
/// whether a body is expected at all.
WireStatus read_response(BufferedReader& in, std::string_view request_method, std::size_t max_bytes,
                         ResponseEnvelope& response);

bool client_wants_close(const RequestHead& head);
void strip_hop_by_hop(HeaderList& headers);
/// Drops hop-by-hop headers and re-frames the body with an exact Content-Length.
void normalize_framing(ResponseEnvelope& response, bool head_request = false);

std::string serialize_request(std::string_view method, std::string_view target, const HeaderList& headers,
                              std::string_view body);
std::string serialize_response(const ResponseEnvelope& response);

}  // namespace clawtrap
