#pragma once

#include "clawtrap/config.hpp"

#include <optional>
#include <string>

namespace clawtrap {

/// The proxy URL clients should use. A wildcard listen host needs an explicit
/// `proxy_host`; throws std::invalid_argument otherwise or for hosts unsafe in a script.
std::string proxy_url_for(const GlobalConfig& config, const std::optional<std::string>& proxy_host = {});

/// POSIX sh script taking `on` or `off`. Source it so the variables reach the calling shell.
std::string generate_toggle_script(const GlobalConfig& config, const std::optional<std::string>& proxy_host = {});

}  // namespace clawtrap
