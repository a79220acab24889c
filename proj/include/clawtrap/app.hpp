#pragma once

#include "clawtrap/audit.hpp"
#include "clawtrap/clock.hpp"
#include "clawtrap/config.hpp"
#include "clawtrap/control_server.hpp"
#include "clawtrap/honey.hpp"
#include "clawtrap/pipeline.hpp"
#include "clawtrap/proxy_server.hpp"
#include "clawtrap/report_queue.hpp"
#include "clawtrap/runtime_state.hpp"
#include "clawtrap/snippets.hpp"
#include "clawtrap/tls.hpp"
#include "clawtrap/upstream.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace clawtrap {

struct AppOptions {
    bool force_off = false;
    Resolver dns = resolve_host;
};

/// Owns and wires every service of a running proxy: honey server, audit log, runtime
/// state, report queue, control API and the proxy listener.
class Application {
public:
    Application(GlobalConfig config, SnippetMap snippets, std::filesystem::path config_dir, AppOptions options = {});
    ~Application();
    Application(const Application&) = delete;
    Application& operator=(const Application&) = delete;

    /// Starts everything; on failure stops what was started and fills `error`.
    bool start(std::string& error);
    void stop();

    HostPort proxy_address() const;
    HostPort control_address() const;
    HostPort honey_address() const;
    /// Three-line summary of the bound addresses.
    std::string banner() const;

    SharedRuntimeState& state() { return *state_; }
    AuditLog& audit() { return *audit_; }
    ReportStore& reports() { return *store_; }
    ReportQueue& report_queue() { return *queue_; }

private:
    GlobalConfig config_;
    SnippetMap snippets_;
    std::filesystem::path config_dir_;
    AppOptions options_;
    SystemClock clock_;

    std::unique_ptr<ReportStore> store_;
    std::unique_ptr<HoneyServer> honey_;
    std::unique_ptr<AuditLog> audit_;
    std::unique_ptr<SharedRuntimeState> state_;
    std::unique_ptr<ReportQueue> queue_;
    std::unique_ptr<CertificateAuthority> ca_;
    std::unique_ptr<NetworkUpstream> upstream_;
    std::unique_ptr<FlowPipeline> pipeline_;
    std::unique_ptr<ControlServer> control_;
    std::unique_ptr<ProxyServer> proxy_;
    bool running_ = false;
};

}  // namespace clawtrap
