#pragma once

#include "clawtrap/pipeline.hpp"
#include "clawtrap/stream.hpp"
#include "clawtrap/tls.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

namespace clawtrap {

struct ProxyTarget {
    Scheme scheme = Scheme::http;
    std::string host;  // normalized
    std::uint16_t port = 80;
    std::string path = "/";  // origin-form, with query
};

/// Parses an absolute-form request target (`http://host[:port]/path?query`).
std::optional<ProxyTarget> parse_proxy_target(std::string_view target);

/// HTTP/1.1 forward proxy: absolute-form requests and CONNECT. One thread per client
/// connection; keep-alive is honored on the client leg.
class ProxyServer {
public:
    ProxyServer(FlowPipeline& pipeline, CertificateAuthority* ca);
    ~ProxyServer();
    ProxyServer(const ProxyServer&) = delete;
    ProxyServer& operator=(const ProxyServer&) = delete;

    bool start(const HostPort& address, std::string& error);
    std::uint16_t port() const { return port_; }

    /// Stops accepting, lets in-flight exchanges finish, then closes idle connections.
    void stop(std::chrono::milliseconds drain = std::chrono::seconds(10));
    std::size_t active_connections() const;

private:
    void accept_loop();
    void handle_connection(int fd);
    void serve_requests(ByteStream& stream, BufferedReader& reader, Scheme scheme,
                        const std::optional<HostPort>& tunnel_target, std::optional<RequestHead> first = {});
    void handle_connect(const RequestHead& head, int fd, BufferedReader& reader);
    void relay(int client_fd, int upstream_fd, std::string pending_client_bytes);
    void bad_request(ByteStream& stream, const std::string& method, const std::string& detail);

    FlowPipeline& pipeline_;
    CertificateAuthority* ca_;
    Socket listener_;
    std::uint16_t port_ = 0;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex mu_;
    std::condition_variable idle_cv_;
    std::set<int> client_fds_;
    std::size_t active_ = 0;
};

}  // namespace clawtrap
