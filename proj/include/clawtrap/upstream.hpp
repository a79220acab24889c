#pragma once

#include "clawtrap/flow.hpp"
#include "clawtrap/http.hpp"
#include "clawtrap/matcher.hpp"
#include "clawtrap/net.hpp"
#include "clawtrap/stream.hpp"
#include "clawtrap/tls.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace clawtrap {

struct UpstreamRequest {
    Scheme scheme = Scheme::http;
    std::string host;
    std::uint16_t port = 80;
    std::optional<IpAddress> connect_ip;  // skip DNS when set
    std::string method;
    std::string target;  // origin-form
    HeaderList headers;
    std::string body;
};

struct UpstreamResult {
    std::optional<ResponseEnvelope> response;
    std::optional<FlowError> error;
    std::string detail;
};

class Upstream {
public:
    virtual ~Upstream() = default;
    virtual UpstreamResult fetch(const UpstreamRequest& request) = 0;
};

using Resolver = std::function<std::vector<IpAddress>(const std::string& host)>;

struct NetworkUpstreamOptions {
    std::chrono::milliseconds connect_timeout{30'000};
    std::chrono::milliseconds exchange_timeout{120'000};
    std::size_t max_response_bytes = 256u << 20;
    SslCtxPtr tls_context;  // required for https
    bool verify_hostname = true;
    Resolver resolver = resolve_host;
};

/// One HTTP/1.1 connection per exchange, closed afterwards.
class NetworkUpstream final : public Upstream {
public:
    explicit NetworkUpstream(NetworkUpstreamOptions options) : options_(std::move(options)) {}
    UpstreamResult fetch(const UpstreamRequest& request) override;

private:
    NetworkUpstreamOptions options_;
};

}  // namespace clawtrap
