#pragma once

#include "clawtrap/net.hpp"

#include <openssl/ssl.h>

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { reset(); }
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = other.release();
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() {
        const int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void reset();

private:
    int fd_ = -1;
};

enum class ConnectError { none, refused, timeout, unreachable };

struct ConnectResult {
    Socket socket;
    ConnectError error = ConnectError::none;
    std::string detail;
};

ConnectResult connect_tcp(const IpAddress& addr, std::uint16_t port, std::chrono::milliseconds timeout);

/// Binds and listens. Returns an invalid socket and fills `error` on failure.
Socket listen_tcp(const HostPort& address, int backlog, std::string& error);

std::uint16_t local_port(int fd);

/// Applies receive and send timeouts to a blocking socket.
void set_io_timeout(int fd, std::chrono::milliseconds timeout);

/// getaddrinfo wrapper; empty on failure.
std::vector<IpAddress> resolve_host(const std::string& host);

class ByteStream {
public:
    virtual ~ByteStream() = default;
    /// >0 bytes read, 0 on orderly close, -1 on error or timeout.
    virtual std::ptrdiff_t read_some(char* buf, std::size_t len) = 0;
    virtual bool write_all(std::string_view data) = 0;
    virtual bool timed_out() const = 0;
};

class PlainStream final : public ByteStream {
public:
    explicit PlainStream(int fd) : fd_(fd) {}
    std::ptrdiff_t read_some(char* buf, std::size_t len) override;
    bool write_all(std::string_view data) override;
    bool timed_out() const override { return timed_out_; }

private:
    int fd_;
    bool timed_out_ = false;
};

struct SslDeleter {
    void operator()(SSL* ssl) const { SSL_free(ssl); }
};
using SslPtr = std::unique_ptr<SSL, SslDeleter>;

/// TLS session over a borrowed descriptor; owns the SSL object.
class TlsStream final : public ByteStream {
public:
    TlsStream(SslPtr ssl, int fd) : ssl_(std::move(ssl)), fd_(fd) {}
    ~TlsStream() override;
    std::ptrdiff_t read_some(char* buf, std::size_t len) override;
    bool write_all(std::string_view data) override;
    bool timed_out() const override { return timed_out_; }
    SSL* ssl() const { return ssl_.get(); }

private:
    SslPtr ssl_;
    int fd_;
    bool timed_out_ = false;
};

class BufferedReader {
public:
    enum class Status { ok, eof, error, too_large };

    explicit BufferedReader(ByteStream& stream) : stream_(stream) {}

    /// Reads one line without its terminator (CRLF or LF). `eof` only when nothing was read.
    Status read_line(std::string& line, std::size_t max_bytes);
    Status read_exact(std::size_t n, std::string& out);
    Status read_to_eof(std::string& out, std::size_t max_bytes);
    bool timed_out() const { return stream_.timed_out(); }
    /// Removes and returns whatever has been read ahead but not consumed.
    std::string take_buffered();

private:
    bool fill();

    ByteStream& stream_;
    std::string buf_;
    std::size_t pos_ = 0;
};

}  // namespace clawtrap
