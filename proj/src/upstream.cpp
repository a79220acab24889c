#include "clawtrap/upstream.hpp"

#include "clawtrap/stream.hpp"

#include <openssl/err.h>

#include <memory>

namespace clawtrap {

namespace {

UpstreamResult failure(FlowError error, std::string detail) {
    UpstreamResult r;
    r.error = error;
    r.detail = std::move(detail);
    return r;
}

FlowError from_connect(ConnectError e) {
    return e == ConnectError::timeout ? FlowError::upstream_timeout : FlowError::upstream_refused;
}

FlowError from_wire(WireStatus s) {
    switch (s) {
        case WireStatus::timeout: return FlowError::upstream_timeout;
        case WireStatus::too_large: return FlowError::response_too_large;
        default: return FlowError::upstream_protocol;
    }
}

}  // namespace

UpstreamResult NetworkUpstream::fetch(const UpstreamRequest& request) {
    std::vector<IpAddress> candidates;
    if (request.connect_ip) {
        candidates.push_back(*request.connect_ip);
    } else if (auto literal = IpAddress::parse(request.host)) {
        candidates.push_back(*literal);
    } else {
        candidates = options_.resolver(request.host);
        if (candidates.empty()) return failure(FlowError::dns_failure, "cannot resolve " + request.host);
    }

    ConnectResult conn;
    for (const auto& ip : candidates) {
        conn = connect_tcp(ip, request.port, options_.connect_timeout);
        if (conn.socket.valid()) break;
    }
    if (!conn.socket.valid()) return failure(from_connect(conn.error), conn.detail);
    set_io_timeout(conn.socket.fd(), options_.exchange_timeout);

    std::unique_ptr<ByteStream> stream;
    if (request.scheme == Scheme::https) {
        if (!options_.tls_context) return failure(FlowError::upstream_tls, "no TLS client context");
        SslPtr ssl(SSL_new(options_.tls_context.get()));
        const bool is_ip = IpAddress::parse(request.host).has_value();
        if (!is_ip) SSL_set_tlsext_host_name(ssl.get(), request.host.c_str());
        if (options_.verify_hostname) {
            if (is_ip) {
                X509_VERIFY_PARAM_set1_ip_asc(SSL_get0_param(ssl.get()), request.host.c_str());
            } else {
                SSL_set1_host(ssl.get(), request.host.c_str());
            }
        }
        SSL_set_fd(ssl.get(), conn.socket.fd());
        if (SSL_connect(ssl.get()) != 1) {
            const long verify = SSL_get_verify_result(ssl.get());
            std::string detail = verify != X509_V_OK ? X509_verify_cert_error_string(verify) : last_ssl_error();
            ERR_clear_error();
            return failure(FlowError::upstream_tls, "TLS handshake with " + request.host + " failed: " + detail);
        }
        stream = std::make_unique<TlsStream>(std::move(ssl), conn.socket.fd());
    } else {
        stream = std::make_unique<PlainStream>(conn.socket.fd());
    }

    HeaderList headers = request.headers;
    strip_hop_by_hop(headers);
    if (!header_value(headers, "Host")) {
        const bool default_port = (request.scheme == Scheme::http && request.port == 80) ||
                                  (request.scheme == Scheme::https && request.port == 443);
        HostPort hp{request.host, request.port};
        set_header(headers, "Host", default_port ? (request.host.find(':') != std::string::npos
                                                        ? "[" + request.host + "]"
                                                        : request.host)
                                                 : hp.to_string());
    }
    set_header(headers, "Connection", "close");
    if (!request.body.empty() || request.method == "POST" || request.method == "PUT" || request.method == "PATCH") {
        set_header(headers, "Content-Length", std::to_string(request.body.size()));
    }
    if (!stream->write_all(serialize_request(request.method, request.target, headers, request.body))) {
        return failure(stream->timed_out() ? FlowError::upstream_timeout : FlowError::upstream_protocol,
                       "cannot send request upstream");
    }

    BufferedReader reader(*stream);
    UpstreamResult result;
    ResponseEnvelope response;
    const auto status = read_response(reader, request.method, options_.max_response_bytes, response);
    if (status != WireStatus::ok) {
        return failure(from_wire(status), status == WireStatus::closed ? "upstream closed without a response"
                                                                       : "cannot read upstream response");
    }
    result.response = std::move(response);
    return result;
}

}  // namespace clawtrap
