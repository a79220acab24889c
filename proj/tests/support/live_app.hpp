#pragma once

#include "clawtrap/app.hpp"

#include "fixtures.hpp"
#include "temp_dir.hpp"

#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace clawtrap::testing {

/// A full in-process proxy (honey, audit, control, proxy) on ephemeral loopback ports,
/// with its files under a private temp directory.
class LiveApp {
public:
    LiveApp(const std::map<std::string, std::string>& snippet_files, const std::function<void(GlobalConfig&)>& customize = {},
            AppOptions options = no_dns()) {
        for (const auto& [name, body] : snippet_files) write_file(dir_ / ("snippets/" + name), body);
        std::filesystem::create_directories(dir_ / "snippets");
        config_ = base_config((dir_ / "snippets").string());
        config_.audit_path = (dir_ / "audit.jsonl").string();
        config_.report_store_path = (dir_ / "reports.jsonl").string();
        if (customize) customize(config_);
        start(options);
    }

    /// Starts a loaded config file as is, except for ports and storage paths.
    explicit LiveApp(GlobalConfig config, AppOptions options = no_dns()) : config_(std::move(config)) {
        config_.listen_address.port = 0;
        config_.control_address.port = 0;
        config_.honey_address.port = 0;
        config_.audit_path = (dir_ / "audit.jsonl").string();
        config_.report_store_path = (dir_ / "reports.jsonl").string();
        start(options);
    }

    ~LiveApp() { app_->stop(); }

    static AppOptions no_dns() {
        AppOptions options;
        options.dns = [](const std::string&) { return std::vector<IpAddress>{}; };
        return options;
    }

    Application& app() { return *app_; }
    const GlobalConfig& config() const { return config_; }
    const TempDir& dir() const { return dir_; }
    std::uint16_t proxy_port() const { return app_->proxy_address().port; }
    std::uint16_t control_port() const { return app_->control_address().port; }
    std::uint16_t honey_port() const { return app_->honey_address().port; }

private:
    void start(const AppOptions& options) {
        app_ = std::make_unique<Application>(config_, load_snippets(config_.snippet_dir), dir_.path(), options);
        std::string error;
        if (!app_->start(error)) throw std::runtime_error("application failed to start: " + error);
    }

    TempDir dir_;
    GlobalConfig config_;
    std::unique_ptr<Application> app_;
};

}  // namespace clawtrap::testing
