#include "clawtrap/http.hpp"

#include "clawtrap/net.hpp"
#include "clawtrap/stream.hpp"

#include <charconv>

namespace clawtrap {

std::optional<std::string> header_value(const HeaderList& headers, std::string_view name) {
    for (const auto& [k, v] : headers) {
        if (iequals(k, name)) return v;
    }
    return std::nullopt;
}

void set_header(HeaderList& headers, std::string_view name, std::string value) {
    bool replaced = false;
    for (auto it = headers.begin(); it != headers.end();) {
        if (!iequals(it->first, name)) {
            ++it;
        } else if (!replaced) {
            it->second = std::move(value);
            replaced = true;
            ++it;
        } else {
            it = headers.erase(it);
        }
    }
    if (!replaced) headers.emplace_back(std::string(name), std::move(value));
}

void remove_header(HeaderList& headers, std::string_view name) {
    std::erase_if(headers, [&](const auto& h) { return iequals(h.first, name); });
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> comma_tokens(std::string_view value) {
    std::vector<std::string> out;
    while (!value.empty()) {
        const auto comma = value.find(',');
        auto token = trim(value.substr(0, comma));
        if (!token.empty()) out.push_back(to_lower(token));
        if (comma == std::string_view::npos) break;
        value.remove_prefix(comma + 1);
    }
    return out;
}

WireStatus from_reader(BufferedReader::Status s, const BufferedReader& in) {
    switch (s) {
        case BufferedReader::Status::ok: return WireStatus::ok;
        case BufferedReader::Status::eof: return WireStatus::closed;
        case BufferedReader::Status::too_large: return WireStatus::too_large;
        case BufferedReader::Status::error: return in.timed_out() ? WireStatus::timeout : WireStatus::malformed;
    }
    return WireStatus::malformed;
}

WireStatus read_headers(BufferedReader& in, HeaderList& headers) {
    std::size_t total = 0;
    std::string line;
    while (true) {
        const auto s = in.read_line(line, kMaxHeaderBytes);
        if (s == BufferedReader::Status::eof) return WireStatus::malformed;
        if (s != BufferedReader::Status::ok) return from_reader(s, in);
        if (line.empty()) return WireStatus::ok;
        total += line.size();
        if (total > kMaxHeaderBytes) return WireStatus::too_large;
        if (line.front() == ' ' || line.front() == '\t') return WireStatus::malformed;  // obsolete folding
        const auto colon = line.find(':');
        if (colon == std::string::npos || colon == 0) return WireStatus::malformed;
        std::string_view name(line.data(), colon);
        if (name.find_first_of(" \t") != std::string_view::npos) return WireStatus::malformed;
        headers.emplace_back(std::string(name), std::string(trim(std::string_view(line).substr(colon + 1))));
    }
}

bool is_chunked(const HeaderList& headers) {
    for (const auto& [k, v] : headers) {
        if (!iequals(k, "Transfer-Encoding")) continue;
        const auto tokens = comma_tokens(v);
        if (!tokens.empty() && tokens.back() == "chunked") return true;
    }
    return false;
}

// nullopt-with-flag: returns false when present but invalid.
bool content_length(const HeaderList& headers, std::optional<std::size_t>& out) {
    for (const auto& [k, v] : headers) {
        if (!iequals(k, "Content-Length")) continue;
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) return false;
        if (out && *out != n) return false;
        out = n;
    }
    return true;
}

WireStatus read_chunked(BufferedReader& in, std::size_t max_bytes, std::string& body) {
    std::string line;
    while (true) {
        auto s = in.read_line(line, 1024);
        if (s != BufferedReader::Status::ok) return s == BufferedReader::Status::eof ? WireStatus::malformed
                                                                                    : from_reader(s, in);
        std::string_view size_text(line);
        size_text = trim(size_text.substr(0, size_text.find(';')));
        std::size_t size = 0;
        auto [ptr, ec] = std::from_chars(size_text.data(), size_text.data() + size_text.size(), size, 16);
        if (ec != std::errc{} || ptr != size_text.data() + size_text.size() || size_text.empty()) {
            return WireStatus::malformed;
        }
        if (size == 0) break;
        if (body.size() + size > max_bytes) return WireStatus::too_large;
        s = in.read_exact(size, body);
        if (s != BufferedReader::Status::ok) return from_reader(s, in);
        s = in.read_line(line, 2);
        if (s != BufferedReader::Status::ok || !line.empty()) return WireStatus::malformed;
    }
    // Trailers are read and discarded.
    while (true) {
        const auto s = in.read_line(line, kMaxHeaderBytes);
        if (s != BufferedReader::Status::ok) return WireStatus::malformed;
        if (line.empty()) return WireStatus::ok;
    }
}

WireStatus read_body(BufferedReader& in, const HeaderList& headers, std::size_t max_bytes, bool until_eof,
                     std::string& body) {
    if (is_chunked(headers)) return read_chunked(in, max_bytes, body);
    std::optional<std::size_t> length;
    if (!content_length(headers, length)) return WireStatus::malformed;
    if (length) {
        if (*length > max_bytes) return WireStatus::too_large;
        return from_reader(in.read_exact(*length, body), in);
    }
    if (!until_eof) return WireStatus::ok;
    const auto s = in.read_to_eof(body, max_bytes);
    return s == BufferedReader::Status::ok ? WireStatus::ok : from_reader(s, in);
}

}  // namespace

std::string media_type(std::string_view content_type) {
    return to_lower(trim(content_type.substr(0, content_type.find(';'))));
}

std::optional<std::string> charset_param(std::string_view content_type) {
    auto semi = content_type.find(';');
    while (semi != std::string_view::npos) {
        content_type.remove_prefix(semi + 1);
        semi = content_type.find(';');
        auto param = trim(content_type.substr(0, semi));
        const auto eq = param.find('=');
        if (eq == std::string_view::npos) continue;
        if (!iequals(trim(param.substr(0, eq)), "charset")) continue;
        auto value = trim(param.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        return to_lower(value);
    }
    return std::nullopt;
}

std::string_view reason_phrase(int status) {
    switch (status) {
        case 100: return "Continue";
        case 200: return "OK";
        case 201: return "Created";
        case 202: return "Accepted";
        case 204: return "No Content";
        case 206: return "Partial Content";
        case 301: return "Moved Permanently";
        case 302: return "Found";
        case 303: return "See Other";
        case 304: return "Not Modified";
        case 307: return "Temporary Redirect";
        case 308: return "Permanent Redirect";
        case 400: return "Bad Request";
        case 401: return "Unauthorized";
        case 403: return "Forbidden";
        case 404: return "Not Found";
        case 405: return "Method Not Allowed";
        case 408: return "Request Timeout";
        case 413: return "Content Too Large";
        case 422: return "Unprocessable Content";
        case 429: return "Too Many Requests";
        case 431: return "Request Header Fields Too Large";
        case 500: return "Internal Server Error";
        case 501: return "Not Implemented";
        case 502: return "Bad Gateway";
        case 503: return "Service Unavailable";
        case 504: return "Gateway Timeout";
        default: return "Unknown";
    }
}

WireStatus read_request_head(BufferedReader& in, RequestHead& head) {
    std::string line;
    auto s = in.read_line(line, 8192);
    // Tolerate a stray empty line between pipelined requests.
    if (s == BufferedReader::Status::ok && line.empty()) s = in.read_line(line, 8192);
    if (s != BufferedReader::Status::ok) return from_reader(s, in);
    const auto sp1 = line.find(' ');
    const auto sp2 = line.rfind(' ');
    if (sp1 == std::string::npos || sp1 == sp2) return WireStatus::malformed;
    head.method = line.substr(0, sp1);
    head.target = line.substr(sp1 + 1, sp2 - sp1 - 1);
    head.version = line.substr(sp2 + 1);
    if (head.method.empty() || head.target.empty()) return WireStatus::malformed;
    if (head.version != "HTTP/1.1" && head.version != "HTTP/1.0") return WireStatus::malformed;
    head.headers.clear();
    return read_headers(in, head.headers);
}

WireStatus read_request_body(BufferedReader& in, const HeaderList& headers, std::size_t max_bytes,
                             std::string& body) {
    return read_body(in, headers, max_bytes, false, body);
}

WireStatus read_response(BufferedReader& in, std::string_view request_method, std::size_t max_bytes,
                         ResponseEnvelope& response) {
    std::string line;
    while (true) {
        auto s = in.read_line(line, 8192);
        if (s != BufferedReader::Status::ok) {
            return s == BufferedReader::Status::eof ? WireStatus::closed : from_reader(s, in);
        }
        if (line.rfind("HTTP/1.", 0) != 0 || line.size() < 12 || line[8] != ' ') return WireStatus::malformed;
        int status = 0;
        auto [ptr, ec] = std::from_chars(line.data() + 9, line.data() + 12, status);
        if (ec != std::errc{} || ptr != line.data() + 12 || status < 100 || status > 999) {
            return WireStatus::malformed;
        }
        response = ResponseEnvelope{};
        response.status = status;
        response.reason = line.size() > 13 ? line.substr(13) : std::string(reason_phrase(status));
        if (const auto h = read_headers(in, response.headers); h != WireStatus::ok) return h;
        if (status >= 100 && status < 200) continue;  // interim response
        break;
    }
    const bool no_body = request_method == "HEAD" || response.status == 204 || response.status == 304;
    if (no_body) return WireStatus::ok;
    return read_body(in, response.headers, max_bytes, true, response.body);
}

bool client_wants_close(const RequestHead& head) {
    const auto connection = header_value(head.headers, "Connection");
    const auto proxy_connection = header_value(head.headers, "Proxy-Connection");
    auto has = [](const std::optional<std::string>& v, std::string_view token) {
        if (!v) return false;
        for (const auto& t : comma_tokens(*v)) {
            if (t == token) return true;
        }
        return false;
    };
    if (has(connection, "close") || has(proxy_connection, "close")) return true;
    if (head.version == "HTTP/1.0") return !(has(connection, "keep-alive") || has(proxy_connection, "keep-alive"));
    return false;
}

void strip_hop_by_hop(HeaderList& headers) {
    std::vector<std::string> listed;
    for (const auto& [k, v] : headers) {
        if (iequals(k, "Connection")) {
            for (auto& t : comma_tokens(v)) listed.push_back(std::move(t));
        }
    }
    static constexpr std::string_view kHopByHop[] = {"Connection", "Keep-Alive", "Proxy-Connection",
                                                     "Proxy-Authenticate", "Proxy-Authorization", "TE",
                                                     "Trailer", "Transfer-Encoding", "Upgrade"};
    std::erase_if(headers, [&](const auto& h) {
        for (auto name : kHopByHop) {
            if (iequals(h.first, name)) return true;
        }
        for (const auto& name : listed) {
            if (iequals(h.first, name)) return true;
        }
        return false;
    });
}

void normalize_framing(ResponseEnvelope& response, bool head_request) {
    strip_hop_by_hop(response.headers);
    if ((response.status >= 100 && response.status < 200) || response.status == 204 || response.status == 304) {
        remove_header(response.headers, "Content-Length");
        return;
    }
    if (head_request) return;
    set_header(response.headers, "Content-Length", std::to_string(response.body.size()));
}

std::string serialize_request(std::string_view method, std::string_view target, const HeaderList& headers,
                              std::string_view body) {
    std::string out;
    out.reserve(256 + body.size());
    out.append(method).append(" ").append(target).append(" HTTP/1.1\r\n");
    for (const auto& [k, v] : headers) out.append(k).append(": ").append(v).append("\r\n");
    out.append("\r\n").append(body);
    return out;
}

std::string serialize_response(const ResponseEnvelope& response) {
    std::string out;
    out.reserve(256 + response.body.size());
    out.append("HTTP/1.1 ").append(std::to_string(response.status)).append(" ");
    out.append(response.reason.empty() ? std::string(reason_phrase(response.status)) : response.reason);
    out.append("\r\n");
    for (const auto& [k, v] : response.headers) out.append(k).append(": ").append(v).append("\r\n");
    out.append("\r\n").append(response.body);
    return out;
}

}  // namespace clawtrap
