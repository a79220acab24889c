#pragma once

#include <openssl/ssl.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace clawtrap::testing {

struct SeenRequest {
    std::string method;
    std::string target;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;

    std::string header(const std::string& name) const;
};

/// Minimal origin server on a raw socket. Every accepted connection is counted before
/// anything is read, so "zero connections" really means nobody connected. Each
/// connection serves one request and closes.
class FakeUpstream {
public:
    /// Returns the raw response bytes to send for a request.
    using Handler = std::function<std::string(const SeenRequest&)>;

    explicit FakeUpstream(Handler handler, const std::string& bind_ip = "127.0.0.1", SSL_CTX* tls = nullptr);
    ~FakeUpstream();
    FakeUpstream(const FakeUpstream&) = delete;
    FakeUpstream& operator=(const FakeUpstream&) = delete;

    std::uint16_t port() const { return port_; }
    int connections() const { return connections_.load(); }
    std::vector<SeenRequest> requests() const;

    /// Raw HTTP/1.1 response with Content-Length framing.
    static std::string response(int status, const std::string& content_type, const std::string& body,
                                const std::vector<std::pair<std::string, std::string>>& extra = {});

private:
    void serve(int fd);

    Handler handler_;
    SSL_CTX* tls_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<int> connections_{0};
    std::atomic<int> active_{0};
    mutable std::mutex mu_;
    std::vector<SeenRequest> requests_;
    std::thread acceptor_;
};

/// A port on 127.0.0.1 with nothing listening (connections are refused).
std::uint16_t closed_port();

}  // namespace clawtrap::testing
