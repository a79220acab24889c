#include "clawtrap/net.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>

namespace clawtrap {

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

std::string normalize_host(std::string_view host) {
    std::string out = to_lower(host);
    if (out.size() > 1 && out.back() == '.') out.pop_back();
    return out;
}

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
    if (text.empty() || text.size() > INET6_ADDRSTRLEN) return std::nullopt;
    std::string buf(text);
    IpAddress addr;
    if (text.find(':') == std::string_view::npos) {
        in_addr v4{};
        if (inet_pton(AF_INET, buf.c_str(), &v4) != 1) return std::nullopt;
        addr.family_ = Family::v4;
        std::memcpy(addr.bytes_.data(), &v4, 4);
        return addr;
    }
    in6_addr v6{};
    if (inet_pton(AF_INET6, buf.c_str(), &v6) != 1) return std::nullopt;
    addr.family_ = Family::v6;
    std::memcpy(addr.bytes_.data(), &v6, 16);
    return addr;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
    IpAddress addr;
    addr.family_ = Family::v4;
    addr.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
    addr.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
    addr.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
    addr.bytes_[3] = static_cast<std::uint8_t>(host_order);
    return addr;
}

std::string IpAddress::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(is_v4() ? AF_INET : AF_INET6, bytes_.data(), buf, sizeof buf);
    return buf;
}

std::optional<CidrBlock> CidrBlock::parse(std::string_view text) {
    const auto slash = text.find('/');
    auto addr = IpAddress::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    const int max_prefix = static_cast<int>(addr->byte_length() * 8);
    int prefix = max_prefix;
    if (slash != std::string_view::npos) {
        const auto digits = text.substr(slash + 1);
        if (digits.empty() || digits.size() > 3) return std::nullopt;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
        if (prefix < 0 || prefix > max_prefix) return std::nullopt;
    }
    CidrBlock block;
    block.network_ = *addr;
    block.prefix_ = prefix;
    return block;
}

bool CidrBlock::contains(const IpAddress& addr) const {
    if (addr.family() != network_.family()) return false;
    const auto& a = addr.bytes();
    const auto& n = network_.bytes();
    int remaining = prefix_;
    for (std::size_t i = 0; remaining > 0; ++i, remaining -= 8) {
        const int bits = std::min(remaining, 8);
        const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
        if ((a[i] & mask) != (n[i] & mask)) return false;
    }
    return true;
}

std::string CidrBlock::to_string() const {
    return network_.to_string() + "/" + std::to_string(prefix_);
}

std::string HostPort::to_string() const {
    if (host.find(':') != std::string::npos) return "[" + host + "]:" + std::to_string(port);
    return host + ":" + std::to_string(port);
}

std::optional<HostPort> parse_host_port(std::string_view text) {
    std::string_view host;
    std::string_view port_text;
    if (!text.empty() && text.front() == '[') {
        const auto close = text.find(']');
        if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':') {
            return std::nullopt;
        }
        host = text.substr(1, close - 1);
        port_text = text.substr(close + 2);
        if (!IpAddress::parse(host)) return std::nullopt;
    } else {
        const auto colon = text.rfind(':');
        if (colon == std::string_view::npos) return std::nullopt;
        host = text.substr(0, colon);
        port_text = text.substr(colon + 1);
        if (host.find(':') != std::string_view::npos) return std::nullopt;
    }
    if (host.empty() || port_text.empty() || port_text.size() > 5) return std::nullopt;
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
        return std::nullopt;
    }
    return HostPort{std::string(host), static_cast<std::uint16_t>(port)};
}

namespace {

std::vector<std::string> split_labels(std::string_view host) {
    std::vector<std::string> labels;
    std::size_t start = 0;
    while (true) {
        const auto dot = host.find('.', start);
        labels.emplace_back(host.substr(start, dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return labels;
}

// Wildcard match of one label; '*' spans any run of characters.
bool label_matches(std::string_view pattern, std::string_view label) {
    std::size_t p = 0, l = 0;
    std::size_t star = std::string_view::npos, resume = 0;
    while (l < label.size()) {
        if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = l;
        } else if (p < pattern.size() && pattern[p] == label[l]) {
            ++p;
            ++l;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            l = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool valid_pattern_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '*';
}

}  // namespace

std::optional<HostGlob> HostGlob::compile(std::string_view pattern) {
    HostGlob glob;
    glob.pattern_ = to_lower(pattern);
    if (glob.pattern_ == "*") {
        glob.match_all_ = true;
        return glob;
    }
    if (glob.pattern_.empty()) return std::nullopt;
    glob.labels_ = split_labels(glob.pattern_);
    for (const auto& label : glob.labels_) {
        if (label.empty()) return std::nullopt;
        if (!std::all_of(label.begin(), label.end(), valid_pattern_char)) return std::nullopt;
    }
    return glob;
}

bool HostGlob::matches(std::string_view host) const {
    if (match_all_) return true;
    const auto labels = split_labels(normalize_host(host));
    if (labels.size() != labels_.size()) return false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!label_matches(labels_[i], labels[i])) return false;
    }
    return true;
}

}  // namespace clawtrap
