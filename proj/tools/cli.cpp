#include "cli.hpp"

#include "clawtrap/app.hpp"
#include "clawtrap/config.hpp"
#include "clawtrap/session.hpp"
#include "clawtrap/snippets.hpp"
#include "clawtrap/tls.hpp"
#include "clawtrap/toggle_script.hpp"
#include "clawtrap/validate.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <system_error>
#include <unistd.h>

namespace clawtrap::cli {

namespace {

namespace fs = std::filesystem;

struct LoadedConfig {
    GlobalConfig config;
    fs::path dir;
};

/// Missing or unreadable file -> usage error; anything else wrong -> failure.
std::optional<LoadedConfig> load_config(const std::string& path, int& exit_code) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        std::cerr << "error: config file not found: " << path << "\n";
        exit_code = kExitUsage;
        return std::nullopt;
    }
    try {
        LoadedConfig out{load_config_file(path), fs::absolute(path).parent_path()};
        return out;
    } catch (const ParseError& e) {
        std::cerr << "error: " << path;
        if (e.line() > 0) std::cerr << ":" << e.line() << ":" << e.column();
        std::cerr << ": " << e.what();
        if (!e.field().empty()) std::cerr << " (at " << e.field() << ")";
        std::cerr << "\n";
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = kExitUsage;
        return std::nullopt;
    }
    exit_code = kExitFailure;
    return std::nullopt;
}

/// Writes to a sibling temp file and renames it into place.
bool write_file_atomic(const fs::path& path, const std::string& content, fs::perms perms) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return false;
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            return false;
        }
    }
    std::error_code ec;
    fs::permissions(tmp, perms, ec);
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        return false;
    }
    return true;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& line : lines) out.append(line).append("\n");
    return out;
}

int cmd_check(const std::string& config_path) {
    int code = kExitOk;
    auto loaded = load_config(config_path, code);
    if (!loaded) return code;
    const auto report = validate(loaded->config);
    std::cout << report.to_text();
    return report.ok() ? kExitOk : kExitFailure;
}

int cmd_run(const std::string& config_path, bool force_off) {
    int code = kExitOk;
    auto loaded = load_config(config_path, code);
    if (!loaded) return code;
    SnippetMap snippets;
    ValidationReport report;
    try {
        snippets = load_snippets(loaded->config.snippet_dir);
        report = validate(loaded->config, snippets);
    } catch (const std::exception& e) {
        report.errors.push_back({"", e.what()});
    }
    if (!report.ok()) {
        std::cerr << report.to_text();
        return kExitFailure;
    }
    for (const auto& w : report.warnings) {
        spdlog::warn("{}{}", w.rule_id.empty() ? "" : w.rule_id + ": ", w.message);
    }

    // Block termination signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    AppOptions options;
    options.force_off = force_off;
    Application app(std::move(loaded->config), std::move(snippets), loaded->dir, options);
    std::string error;
    if (!app.start(error)) {
        std::cerr << "error: " << error << "\n";
        return kExitFailure;
    }
    std::cout << app.banner();
    if (force_off) std::cout << "kill switch engaged: all rules off\n";
    std::cout.flush();

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("received signal {}, draining", sig);
    app.stop();
    return kExitOk;
}

int cmd_gen_ca(const std::string& out_dir, bool force) {
    try {
        const auto ca = generate_ca();
        std::string error;
        switch (write_ca_files(out_dir, ca, force, error)) {
            case WriteCaStatus::ok:
                std::cout << "wrote " << (fs::path(out_dir) / kCaCertFile).string() << "\n"
                          << "wrote " << (fs::path(out_dir) / kCaKeyFile).string() << "\n";
                return kExitOk;
            case WriteCaStatus::exists:
            case WriteCaStatus::io_error:
                std::cerr << "error: " << error << "\n";
                return kExitFailure;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kExitFailure;
}

int cmd_gen_toggle_script(const std::string& config_path, const std::string& out_path,
                          const std::optional<std::string>& proxy_host) {
    int code = kExitOk;
    auto loaded = load_config(config_path, code);
    if (!loaded) return code;
    const auto report = validate(loaded->config);
    if (!report.ok()) {
        std::cerr << report.to_text();
        return kExitFailure;
    }
    std::string script;
    try {
        script = generate_toggle_script(loaded->config, proxy_host);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    if (out_path.empty()) {
        std::cout << script;
        return kExitOk;
    }
    using fs::perms;
    const auto mode = perms::owner_all | perms::group_read | perms::group_exec | perms::others_read |
                      perms::others_exec;
    if (!write_file_atomic(out_path, script, mode)) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_replay(const std::string& session_path, const std::string& config_path, const std::string& out_path,
               const std::string& audit_out_path) {
    int code = kExitOk;
    auto loaded = load_config(config_path, code);
    if (!loaded) return code;
    RecordedSession session;
    SnippetMap snippets;
    try {
        session = load_session_file(session_path);
        snippets = load_snippets(loaded->config.snippet_dir);
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << session_path << ": " << e.what() << "\n";
        return kExitFailure;
    }
    const auto report = validate(loaded->config, snippets);
    if (!report.ok()) {
        std::cerr << report.to_text();
        return kExitFailure;
    }
    const auto output = replay_session(session, loaded->config, snippets);
    const auto responses = join_lines(output.response_lines);
    const auto audit = join_lines(output.audit_lines);
    const auto file_mode = fs::perms::owner_read | fs::perms::owner_write | fs::perms::group_read |
                           fs::perms::others_read;
    if (out_path.empty()) {
        std::cout << responses;
    } else if (!write_file_atomic(out_path, responses, file_mode)) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kExitFailure;
    }
    if (!audit_out_path.empty() && !write_file_atomic(audit_out_path, audit, file_mode)) {
        std::cerr << "error: cannot write " << audit_out_path << "\n";
        if (!out_path.empty()) {
            std::error_code ec;
            fs::remove(out_path, ec);
        }
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("clawtrap");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");

    CLI::App app{"clawtrap: rule-driven MITM proxy for red-teaming web agents"};
    app.require_subcommand(1);

    std::string config_path;
    bool force_off = false;
    auto* run_cmd = app.add_subcommand("run", "Run the proxy, honey server and control API");
    run_cmd->add_option("--config", config_path, "Config file")->required();
    run_cmd->add_flag("--force-off", force_off, "Start with the kill switch engaged");

    auto* check_cmd = app.add_subcommand("check", "Validate a config and print the report");
    check_cmd->add_option("--config", config_path, "Config file")->required();

    std::string out_path;
    bool force = false;
    auto* ca_cmd = app.add_subcommand("gen-ca", "Generate the interception CA certificate and key");
    ca_cmd->add_option("--out", out_path, "Output directory")->required();
    ca_cmd->add_flag("--force", force, "Overwrite existing files");

    std::string proxy_host;
    auto* toggle_cmd = app.add_subcommand("gen-toggle-script", "Generate the client proxy toggle script");
    toggle_cmd->add_option("--config", config_path, "Config file")->required();
    toggle_cmd->add_option("--out", out_path, "Output file (stdout when omitted)");
    toggle_cmd->add_option("--proxy-host", proxy_host, "Address clients use to reach the proxy");

    std::string session_path;
    std::string audit_out_path;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded session through the pipeline");
    replay_cmd->add_option("session", session_path, "Recorded session file")->required();
    replay_cmd->add_option("--config", config_path, "Config file")->required();
    replay_cmd->add_option("--out", out_path, "Transformed responses (stdout when omitted)");
    replay_cmd->add_option("--audit-out", audit_out_path, "Audit log of the replay");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*run_cmd) return cmd_run(config_path, force_off);
    if (*check_cmd) return cmd_check(config_path);
    if (*ca_cmd) return cmd_gen_ca(out_path, force);
    if (*toggle_cmd) {
        return cmd_gen_toggle_script(config_path, out_path,
                                     proxy_host.empty() ? std::nullopt : std::optional<std::string>(proxy_host));
    }
    if (*replay_cmd) return cmd_replay(session_path, config_path, out_path, audit_out_path);
    return kExitUsage;
}

}  // namespace clawtrap::cli
