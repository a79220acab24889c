#include "clawtrap/app.hpp"

#include <spdlog/spdlog.h>

namespace clawtrap {

namespace {

/// Where to reach a server bound to `bound`: wildcard hosts are reached over loopback.
HostPort reachable(const HostPort& bound, std::uint16_t port) {
    HostPort out{bound.host, port};
    if (out.host == "0.0.0.0" || out.host.empty()) out.host = "127.0.0.1";
    if (out.host == "::") out.host = "::1";
    return out;
}

}  // namespace

Application::Application(GlobalConfig config, SnippetMap snippets, std::filesystem::path config_dir,
                         AppOptions options)
    : config_(std::move(config)),
      snippets_(std::move(snippets)),
      config_dir_(std::move(config_dir)),
      options_(std::move(options)) {}

Application::~Application() { stop(); }

bool Application::start(std::string& error) {
    try {
        store_ = ReportStore::open(config_.report_store_path);
        honey_ = std::make_unique<HoneyServer>(*store_);
        if (!honey_->start(config_.honey_address, error)) return false;

        audit_ = AuditLog::open_file(config_.audit_path, clock_);
        state_ = std::make_unique<SharedRuntimeState>(config_, snippets_, audit_.get(), config_dir_);
        if (options_.force_off) state_->set_mode(kAllRulesTarget, false);

        queue_ = std::make_unique<ReportQueue>(
            ReportQueue::http_delivery(reachable(config_.honey_address, honey_->port())), audit_.get());
        queue_->start();

        if (config_.tls.mode == TlsMode::intercept) {
            ca_ = CertificateAuthority::load(config_.tls.ca_cert_path, config_.tls.ca_key_path);
        }
        NetworkUpstreamOptions upstream_options;
        upstream_options.connect_timeout = std::chrono::milliseconds(config_.limits.connect_timeout_ms);
        upstream_options.exchange_timeout = std::chrono::milliseconds(config_.limits.exchange_timeout_ms);
        upstream_options.max_response_bytes = config_.limits.max_response_bytes;
        upstream_options.tls_context = make_client_context(config_.tls);
        upstream_options.verify_hostname = config_.tls.upstream_verify;
        upstream_options.resolver = options_.dns;
        upstream_ = std::make_unique<NetworkUpstream>(std::move(upstream_options));
        pipeline_ = std::make_unique<FlowPipeline>(*state_, *upstream_, queue_.get(), audit_.get(), clock_,
                                                   options_.dns, max_recorded_flow_id(*audit_) + 1);

        proxy_ = std::make_unique<ProxyServer>(*pipeline_, ca_.get());
        if (!proxy_->start(config_.listen_address, error)) {
            stop();
            return false;
        }
        ControlServer::Options control_options;
        control_options.addresses = [this] {
            return nlohmann::json{{"listen", proxy_address().to_string()},
                                  {"control", control_address().to_string()},
                                  {"honey", honey_address().to_string()}};
        };
        control_ = std::make_unique<ControlServer>(*state_, *audit_, queue_.get(), control_options);
        if (!control_->start(config_.control_address, error)) {
            stop();
            return false;
        }
    } catch (const std::exception& e) {
        error = e.what();
        stop();
        return false;
    }
    running_ = true;
    return true;
}

void Application::stop() {
    if (proxy_) proxy_->stop();
    if (queue_) queue_->stop();
    if (control_) control_->stop();
    if (audit_) audit_->close();
    if (honey_) honey_->stop();
    if (running_) spdlog::info("clawtrap stopped");
    running_ = false;
}

HostPort Application::proxy_address() const { return {config_.listen_address.host, proxy_ ? proxy_->port() : std::uint16_t{0}}; }

HostPort Application::control_address() const {
    return {config_.control_address.host, control_ ? control_->port() : std::uint16_t{0}};
}

HostPort Application::honey_address() const {
    return {config_.honey_address.host, honey_ ? honey_->port() : std::uint16_t{0}};
}

std::string Application::banner() const {
    return "proxy    listening on " + proxy_address().to_string() + "\n" + "control  listening on " +
           control_address().to_string() + "\n" + "honey    listening on " + honey_address().to_string() + "\n";
}

}  // namespace clawtrap
