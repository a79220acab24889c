#include "clawtrap/toggle_script.hpp"

#include <stdexcept>

namespace clawtrap {

namespace {

bool script_safe(const std::string& host) {
    if (host.empty()) return false;
    for (const char c : host) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '-' || c == ':' || c == '_';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

std::string proxy_url_for(const GlobalConfig& config, const std::optional<std::string>& proxy_host) {
    std::string host = proxy_host.value_or(config.listen_address.host);
    if (host == "0.0.0.0" || host == "::" || host.empty()) {
        throw std::invalid_argument("listen address " + config.listen_address.to_string() +
                                    " is a wildcard; pass the address clients should use (--proxy-host)");
    }
    if (!script_safe(host)) throw std::invalid_argument("proxy host '" + host + "' is not a plain host name or IP");
    if (host.find(':') != std::string::npos) host = "[" + host + "]";
    return "http://" + host + ":" + std::to_string(config.listen_address.port);
}

std::string generate_toggle_script(const GlobalConfig& config, const std::optional<std::string>& proxy_host) {
    const std::string url = proxy_url_for(config, proxy_host);
    std::string s;
    s += "#!/bin/sh\n";
    s += "# Routes an agent's HTTP(S) traffic through the clawtrap proxy at " + url + ".\n";
    s += "# Source it so the variables reach the calling shell:\n";
    s += "#   . ./clawtrap_toggle.sh on      (bash, zsh)\n";
    s += "#   set -- on; . ./clawtrap_toggle.sh   (any POSIX sh)\n";
    s += "\n";
    s += "case \"${1:-}\" in\n";
    s += "  on)\n";
    for (const char* var : {"HTTP_PROXY", "HTTPS_PROXY", "http_proxy", "https_proxy"}) {
        s += std::string("    export ") + var + "=\"" + url + "\"\n";
    }
    s += "    echo \"clawtrap proxy on: " + url + "\"\n";
    s += "    echo \"Restart the agent so it picks up the proxy settings.\"\n";
    s += "    ;;\n";
    s += "  off)\n";
    s += "    unset HTTP_PROXY HTTPS_PROXY http_proxy https_proxy\n";
    s += "    echo \"clawtrap proxy off\"\n";
    s += "    echo \"Restart the agent so it picks up the proxy settings.\"\n";
    s += "    ;;\n";
    s += "  *)\n";
    s += "    echo \"usage: . clawtrap_toggle.sh on|off\" >&2\n";
    s += "    return 2 2>/dev/null || exit 2\n";
    s += "    ;;\n";
    s += "esac\n";
    return s;
}

}  // namespace clawtrap
