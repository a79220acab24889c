#include "clawtrap/stream.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace clawtrap {

void Socket::reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

namespace {

socklen_t fill_sockaddr(const IpAddress& addr, std::uint16_t port, sockaddr_storage& ss) {
    std::memset(&ss, 0, sizeof ss);
    if (addr.is_v4()) {
        auto* sin = reinterpret_cast<sockaddr_in*>(&ss);
        sin->sin_family = AF_INET;
        sin->sin_port = htons(port);
        std::memcpy(&sin->sin_addr, addr.bytes().data(), 4);
        return sizeof(sockaddr_in);
    }
    auto* sin6 = reinterpret_cast<sockaddr_in6*>(&ss);
    sin6->sin6_family = AF_INET6;
    sin6->sin6_port = htons(port);
    std::memcpy(&sin6->sin6_addr, addr.bytes().data(), 16);
    return sizeof(sockaddr_in6);
}

ConnectError classify(int err) {
    switch (err) {
        case ECONNREFUSED: return ConnectError::refused;
        case ETIMEDOUT: return ConnectError::timeout;
        default: return ConnectError::unreachable;
    }
}

}  // namespace

ConnectResult connect_tcp(const IpAddress& addr, std::uint16_t port, std::chrono::milliseconds timeout) {
    ConnectResult result;
    sockaddr_storage ss{};
    const socklen_t len = fill_sockaddr(addr, port, ss);
    Socket sock(::socket(ss.ss_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!sock.valid()) {
        result.error = ConnectError::unreachable;
        result.detail = std::strerror(errno);
        return result;
    }
    const int flags = ::fcntl(sock.fd(), F_GETFL, 0);
    ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(sock.fd(), reinterpret_cast<sockaddr*>(&ss), len);
    if (rc != 0 && errno != EINPROGRESS) {
        result.error = classify(errno);
        result.detail = std::strerror(errno);
        return result;
    }
    if (rc != 0) {
        pollfd pfd{sock.fd(), POLLOUT, 0};
        do {
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        } while (rc < 0 && errno == EINTR);
        if (rc == 0) {
            result.error = ConnectError::timeout;
            result.detail = "connect timed out";
            return result;
        }
        int err = 0;
        socklen_t err_len = sizeof err;
        ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &err_len);
        if (rc < 0 || err != 0) {
            result.error = classify(err ? err : errno);
            result.detail = std::strerror(err ? err : errno);
            return result;
        }
    }
    ::fcntl(sock.fd(), F_SETFL, flags);
    const int one = 1;
    ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    result.socket = std::move(sock);
    return result;
}

Socket listen_tcp(const HostPort& address, int backlog, std::string& error) {
    auto ip = IpAddress::parse(address.host);
    if (!ip) {
        const auto resolved = resolve_host(address.host);
        if (resolved.empty()) {
            error = "cannot resolve listen host " + address.host;
            return Socket{};
        }
        ip = resolved.front();
    }
    sockaddr_storage ss{};
    const socklen_t len = fill_sockaddr(*ip, address.port, ss);
    Socket sock(::socket(ss.ss_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!sock.valid()) {
        error = std::strerror(errno);
        return Socket{};
    }
    const int one = 1;
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&ss), len) != 0 || ::listen(sock.fd(), backlog) != 0) {
        error = "cannot listen on " + address.to_string() + ": " + std::strerror(errno);
        return Socket{};
    }
    return sock;
}

std::uint16_t local_port(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return 0;
    if (ss.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
    return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
}

void set_io_timeout(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

std::vector<IpAddress> resolve_host(const std::string& host) {
    std::vector<IpAddress> out;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0) return out;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        char buf[INET6_ADDRSTRLEN] = {};
        if (ai->ai_family == AF_INET) {
            inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(ai->ai_addr)->sin_addr, buf, sizeof buf);
        } else if (ai->ai_family == AF_INET6) {
            inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(ai->ai_addr)->sin6_addr, buf, sizeof buf);
        } else {
            continue;
        }
        if (auto ip = IpAddress::parse(buf)) out.push_back(*ip);
    }
    ::freeaddrinfo(res);
    return out;
}

std::ptrdiff_t PlainStream::read_some(char* buf, std::size_t len) {
    while (true) {
        const auto n = ::recv(fd_, buf, len, 0);
        if (n >= 0) return n;
        if (errno == EINTR) continue;
        timed_out_ = errno == EAGAIN || errno == EWOULDBLOCK;
        return -1;
    }
}

bool PlainStream::write_all(std::string_view data) {
    while (!data.empty()) {
        const auto n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            timed_out_ = errno == EAGAIN || errno == EWOULDBLOCK;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

TlsStream::~TlsStream() {
    if (ssl_) SSL_shutdown(ssl_.get());
}

std::ptrdiff_t TlsStream::read_some(char* buf, std::size_t len) {
    while (true) {
        const int n = SSL_read(ssl_.get(), buf, static_cast<int>(len));
        if (n > 0) return n;
        const int err = SSL_get_error(ssl_.get(), n);
        if (err == SSL_ERROR_ZERO_RETURN) return 0;
        if (err == SSL_ERROR_SYSCALL && errno == EINTR) continue;
        if (err == SSL_ERROR_SYSCALL && errno == 0 && n == 0) return 0;  // peer closed without close_notify
        timed_out_ = err == SSL_ERROR_SYSCALL && (errno == EAGAIN || errno == EWOULDBLOCK);
        if (err == SSL_ERROR_WANT_READ) timed_out_ = true;
        return -1;
    }
}

bool TlsStream::write_all(std::string_view data) {
    while (!data.empty()) {
        const int n = SSL_write(ssl_.get(), data.data(), static_cast<int>(data.size()));
        if (n <= 0) {
            const int err = SSL_get_error(ssl_.get(), n);
            if (err == SSL_ERROR_SYSCALL && errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

std::string BufferedReader::take_buffered() {
    std::string rest = buf_.substr(pos_);
    buf_.clear();
    pos_ = 0;
    return rest;
}

bool BufferedReader::fill() {
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    char chunk[16384];
    const auto n = stream_.read_some(chunk, sizeof chunk);
    if (n <= 0) return false;
    buf_.append(chunk, static_cast<std::size_t>(n));
    return true;
}

BufferedReader::Status BufferedReader::read_line(std::string& line, std::size_t max_bytes) {
    line.clear();
    std::size_t scanned = 0;  // relative to pos_, which fill() may rebase
    while (true) {
        const auto nl = buf_.find('\n', pos_ + scanned);
        if (nl != std::string::npos) {
            auto end = nl;
            if (end > pos_ && buf_[end - 1] == '\r') --end;
            line.assign(buf_, pos_, end - pos_);
            pos_ = nl + 1;
            return line.size() > max_bytes ? Status::too_large : Status::ok;
        }
        scanned = buf_.size() - pos_;
        if (buf_.size() - pos_ > max_bytes) return Status::too_large;
        const bool had_data = buf_.size() > pos_;
        if (!fill()) {
            if (stream_.timed_out()) return Status::error;
            return had_data ? Status::error : Status::eof;
        }
    }
}

BufferedReader::Status BufferedReader::read_exact(std::size_t n, std::string& out) {
    while (buf_.size() - pos_ < n) {
        if (!fill()) return Status::error;
    }
    out.append(buf_, pos_, n);
    pos_ += n;
    return Status::ok;
}

BufferedReader::Status BufferedReader::read_to_eof(std::string& out, std::size_t max_bytes) {
    while (true) {
        out.append(buf_, pos_, std::string::npos);
        pos_ = buf_.size();
        if (out.size() > max_bytes) return Status::too_large;
        char chunk[16384];
        const auto n = stream_.read_some(chunk, sizeof chunk);
        if (n == 0) return Status::ok;
        if (n < 0) return Status::error;
        buf_.assign(chunk, static_cast<std::size_t>(n));
        pos_ = 0;
    }
}

}  // namespace clawtrap
