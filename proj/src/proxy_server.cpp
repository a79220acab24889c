#include "clawtrap/proxy_server.hpp"

#include <openssl/err.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>

namespace clawtrap {

namespace {

std::optional<std::uint16_t> parse_port(std::string_view text) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || value == 0 || value > 65535) {
        return std::nullopt;
    }
    return static_cast<std::uint16_t>(value);
}

std::optional<HostPort> parse_authority(std::string_view authority, std::uint16_t default_port) {
    if (authority.empty()) return std::nullopt;
    HostPort out;
    out.port = default_port;
    if (authority.front() == '[') {
        const auto close = authority.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        out.host = std::string(authority.substr(1, close - 1));
        const auto rest = authority.substr(close + 1);
        if (!rest.empty()) {
            if (rest.front() != ':') return std::nullopt;
            const auto p = parse_port(rest.substr(1));
            if (!p) return std::nullopt;
            out.port = *p;
        }
    } else {
        const auto colon = authority.rfind(':');
        if (colon != std::string_view::npos) {
            const auto p = parse_port(authority.substr(colon + 1));
            if (!p) return std::nullopt;
            out.port = *p;
            authority = authority.substr(0, colon);
        }
        out.host = std::string(authority);
    }
    out.host = normalize_host(out.host);
    if (out.host.empty()) return std::nullopt;
    return out;
}

RequestSummary summary_of(const RequestHead& head, Scheme scheme, const std::string& host, std::uint16_t port,
                          const std::string& path) {
    RequestSummary s;
    s.method = head.method;
    s.scheme = scheme;
    s.host = host;
    s.port = port;
    s.path = path;
    s.headers = head.headers;
    return s;
}

}  // namespace

std::optional<ProxyTarget> parse_proxy_target(std::string_view target) {
    ProxyTarget out;
    std::string_view rest;
    if (target.size() > 7 && iequals(target.substr(0, 7), "http://")) {
        out.scheme = Scheme::http;
        rest = target.substr(7);
    } else if (target.size() > 8 && iequals(target.substr(0, 8), "https://")) {
        out.scheme = Scheme::https;
        rest = target.substr(8);
    } else {
        return std::nullopt;
    }
    const auto end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, end);
    if (authority.find('@') != std::string_view::npos) authority = authority.substr(authority.rfind('@') + 1);
    const auto hp = parse_authority(authority, out.scheme == Scheme::https ? 443 : 80);
    if (!hp) return std::nullopt;
    out.host = hp->host;
    out.port = hp->port;
    std::string path = end == std::string_view::npos ? std::string() : std::string(rest.substr(end));
    if (const auto hash = path.find('#'); hash != std::string::npos) path.erase(hash);
    if (path.empty() || path.front() != '/') path.insert(0, "/");
    out.path = std::move(path);
    return out;
}

ProxyServer::ProxyServer(FlowPipeline& pipeline, CertificateAuthority* ca) : pipeline_(pipeline), ca_(ca) {}

ProxyServer::~ProxyServer() { stop(std::chrono::milliseconds(0)); }

bool ProxyServer::start(const HostPort& address, std::string& error) {
    listener_ = listen_tcp(address, 1024, error);
    if (!listener_.valid()) return false;
    port_ = local_port(listener_.fd());
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
    return true;
}

void ProxyServer::accept_loop() {
    while (!stopping_) {
        pollfd pfd{listener_.fd(), POLLIN, 0};
        const int rc = ::poll(&pfd, 1, 100);
        if (rc <= 0) continue;
        const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        {
            std::lock_guard lock(mu_);
            client_fds_.insert(fd);
            ++active_;
        }
        std::thread([this, fd] {
            handle_connection(fd);
            std::lock_guard lock(mu_);
            client_fds_.erase(fd);
            ::close(fd);
            --active_;
            idle_cv_.notify_all();
        }).detach();
    }
}

void ProxyServer::stop(std::chrono::milliseconds drain) {
    if (!acceptor_.joinable()) return;
    stopping_ = true;
    acceptor_.join();
    listener_.reset();
    std::unique_lock lock(mu_);
    // Half-close the read side: idle keep-alive connections see EOF, while exchanges that
    // are already running can still write their response.
    for (const int fd : client_fds_) ::shutdown(fd, SHUT_RD);
    if (!idle_cv_.wait_for(lock, drain, [this] { return active_ == 0; })) {
        for (const int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
        idle_cv_.wait(lock, [this] { return active_ == 0; });
    }
}

std::size_t ProxyServer::active_connections() const {
    std::lock_guard lock(mu_);
    return active_;
}

void ProxyServer::handle_connection(int fd) {
    const auto snap = pipeline_.state().snapshot();
    set_io_timeout(fd, std::chrono::milliseconds(snap->config->limits.exchange_timeout_ms));
    PlainStream stream(fd);
    BufferedReader reader(stream);
    RequestHead head;
    const auto status = read_request_head(reader, head);
    if (status == WireStatus::closed || status == WireStatus::timeout) return;
    if (status != WireStatus::ok) {
        bad_request(stream, head.method, "malformed request head");
        return;
    }
    if (head.method == "CONNECT") {
        handle_connect(head, fd, reader);
        return;
    }
    serve_requests(stream, reader, Scheme::http, std::nullopt, std::move(head));
}

void ProxyServer::bad_request(ByteStream& stream, const std::string& method, const std::string& detail) {
    RequestSummary summary;
    summary.method = method;
    FlowRecord record = pipeline_.open_record(std::move(summary));
    record.error = FlowError::bad_request;
    record.error_detail = detail;
    record.client_status = 400;
    pipeline_.close_record(record);
    ResponseEnvelope response;
    response.status = 400;
    response.body = "clawtrap: bad-request: " + detail + "\n";
    response.headers = {{"Content-Type", "text/plain; charset=utf-8"},
                        {"Content-Length", std::to_string(response.body.size())},
                        {"Connection", "close"}};
    stream.write_all(serialize_response(response));
}

void ProxyServer::serve_requests(ByteStream& stream, BufferedReader& reader, Scheme scheme,
                                 const std::optional<HostPort>& tunnel_target, std::optional<RequestHead> first) {
    while (true) {
        RequestHead head;
        if (first) {
            head = std::move(*first);
            first.reset();
        } else {
            const auto status = read_request_head(reader, head);
            if (status == WireStatus::closed || status == WireStatus::timeout) return;
            if (status != WireStatus::ok) {
                bad_request(stream, head.method, "malformed request head");
                return;
            }
        }
        std::optional<ProxyTarget> target;
        if (!head.target.empty() && head.target.front() == '/') {
            // Origin-form: inside an intercepted tunnel, or a client talking to us directly.
            const auto host_header = header_value(head.headers, "Host");
            const std::uint16_t default_port = scheme == Scheme::https ? 443 : 80;
            std::optional<HostPort> authority;
            if (tunnel_target) {
                authority = tunnel_target;
            } else if (host_header) {
                authority = parse_authority(*host_header, default_port);
            }
            if (authority) target = ProxyTarget{scheme, authority->host, authority->port, head.target};
        } else if (!tunnel_target) {
            target = parse_proxy_target(head.target);
        }
        if (!target) {
            bad_request(stream, head.method, "unsupported request target: " + head.target);
            return;
        }
        const auto limits = pipeline_.state().snapshot()->config->limits;
        FlowInput input;
        input.summary = summary_of(head, target->scheme, target->host, target->port, target->path);
        input.target = target->path;
        const auto body_status = read_request_body(reader, head.headers, limits.max_response_bytes, input.body);
        if (body_status != WireStatus::ok) {
            bad_request(stream, head.method, "cannot read request body");
            return;
        }
        auto result = pipeline_.handle_flow(std::move(input));
        const bool close = client_wants_close(head) || stopping_;
        if (close) set_header(result.response.headers, "Connection", "close");
        if (!stream.write_all(serialize_response(result.response)) || close) return;
    }
}

void ProxyServer::handle_connect(const RequestHead& head, int fd, BufferedReader& reader) {
    const auto authority = parse_authority(head.target, 443);
    PlainStream plain(fd);
    if (!authority) {
        bad_request(plain, head.method, "invalid CONNECT target: " + head.target);
        return;
    }
    const auto snap = pipeline_.state().snapshot();
    RequestSummary summary = summary_of(head, Scheme::https, authority->host, authority->port, "/");

    InterceptDecision decision;
    try {
        decision = establish_tls_intercept(authority->host, snap->config->tls, ca_);
    } catch (const std::exception& e) {
        FlowRecord record = pipeline_.open_record(std::move(summary));
        record.error = FlowError::internal;
        record.error_detail = e.what();
        record.client_status = 500;
        pipeline_.close_record(record);
        plain.write_all("HTTP/1.1 500 Internal Server Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        return;
    }

    if (decision.kind == InterceptDecision::Kind::intercept) {
        if (!plain.write_all("HTTP/1.1 200 Connection Established\r\n\r\n")) return;
        SslPtr ssl(SSL_new(decision.leaf->context.get()));
        SSL_set_fd(ssl.get(), fd);
        if (!reader.take_buffered().empty() || SSL_accept(ssl.get()) != 1) {
            ERR_clear_error();
            FlowRecord record = pipeline_.open_record(std::move(summary));
            record.error = FlowError::tls_handshake;
            record.error_detail = "client TLS handshake failed for " + authority->host;
            record.client_status = 200;
            pipeline_.close_record(record);
            return;
        }
        TlsStream tls(std::move(ssl), fd);
        BufferedReader tls_reader(tls);
        serve_requests(tls, tls_reader, Scheme::https, authority);
        return;
    }

    // Opaque tunnel: no inspection, one record when it closes.
    FlowRecord record = pipeline_.open_record(summary);
    record.tunneled = true;
    const auto target = resolve_target(*snap->config, authority->host, authority->port, true, pipeline_.dns());
    record.request.destination_ip = target.destination_ip;
    auto fail = [&](FlowError error, const std::string& detail) {
        const int status = error == FlowError::upstream_timeout ? 504 : 502;
        record.error = error;
        record.error_detail = detail;
        record.client_status = status;
        pipeline_.close_record(record);
        plain.write_all("HTTP/1.1 " + std::to_string(status) + " " + std::string(reason_phrase(status)) +
                        "\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
    };
    if (!target.destination_ip) {
        fail(FlowError::dns_failure, "cannot resolve " + authority->host);
        return;
    }
    auto conn = connect_tcp(*target.destination_ip, target.connect_port,
                            std::chrono::milliseconds(snap->config->limits.connect_timeout_ms));
    if (!conn.socket.valid()) {
        fail(conn.error == ConnectError::timeout ? FlowError::upstream_timeout : FlowError::upstream_refused,
             conn.detail);
        return;
    }
    record.client_status = 200;
    if (!plain.write_all("HTTP/1.1 200 Connection Established\r\n\r\n")) {
        pipeline_.close_record(record);
        return;
    }
    relay(fd, conn.socket.fd(), reader.take_buffered());
    pipeline_.close_record(record);
}

void ProxyServer::relay(int client_fd, int upstream_fd, std::string pending_client_bytes) {
    auto send_all = [](int fd, const char* data, std::size_t len) {
        while (len > 0) {
            const auto n = ::send(fd, data, len, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            data += n;
            len -= static_cast<std::size_t>(n);
        }
        return true;
    };
    if (!pending_client_bytes.empty()) {
        if (!send_all(upstream_fd, pending_client_bytes.data(), pending_client_bytes.size())) return;
    }
    const int idle_ms = static_cast<int>(pipeline_.state().snapshot()->config->limits.exchange_timeout_ms);
    bool client_open = true;
    bool upstream_open = true;
    char buf[16384];
    while (client_open || upstream_open) {
        pollfd fds[2] = {{client_fd, static_cast<short>(client_open ? POLLIN : 0), 0},
                         {upstream_fd, static_cast<short>(upstream_open ? POLLIN : 0), 0}};
        const int rc = ::poll(fds, 2, idle_ms);
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return;
        for (int i = 0; i < 2; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const int from = i == 0 ? client_fd : upstream_fd;
            const int to = i == 0 ? upstream_fd : client_fd;
            const auto n = ::recv(from, buf, sizeof buf, 0);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) continue;
                (i == 0 ? client_open : upstream_open) = false;
                ::shutdown(to, SHUT_WR);
                if (n < 0) return;
                continue;
            }
            if (!send_all(to, buf, static_cast<std::size_t>(n))) return;
        }
    }
}

}  // namespace clawtrap
