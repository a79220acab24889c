#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

/// An IPv4 or IPv6 address in network byte order.
class IpAddress {
public:
    enum class Family : std::uint8_t { v4, v6 };

    static std::optional<IpAddress> parse(std::string_view text);
    static IpAddress v4(std::uint32_t host_order);

    Family family() const { return family_; }
    bool is_v4() const { return family_ == Family::v4; }
    std::size_t byte_length() const { return is_v4() ? 4 : 16; }
    const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }

    std::string to_string() const;

    auto operator<=>(const IpAddress&) const = default;

private:
    Family family_ = Family::v4;
    std::array<std::uint8_t, 16> bytes_{};
};

/// Address block in CIDR notation. A bare address parses as a host block (/32 or /128).
class CidrBlock {
public:
    static std::optional<CidrBlock> parse(std::string_view text);

    bool contains(const IpAddress& addr) const;
    const IpAddress& network() const { return network_; }
    int prefix_length() const { return prefix_; }
    std::string to_string() const;

private:
    IpAddress network_;
    int prefix_ = 0;
};

struct HostPort {
    std::string host;
    std::uint16_t port = 0;

    std::string to_string() const;
    bool operator==(const HostPort&) const = default;
};

/// Parses `host:port` or `[v6]:port`. The port must be present and within 0..65535.
std::optional<HostPort> parse_host_port(std::string_view text);

/// Case-insensitive, label-wise host pattern. A lone `*` matches every host; otherwise
/// the pattern and the host must have the same number of labels and `*` inside a label
/// matches any run of characters within that label.
class HostGlob {
public:
    static std::optional<HostGlob> compile(std::string_view pattern);

    bool matches(std::string_view host) const;
    const std::string& pattern() const { return pattern_; }

private:
    std::string pattern_;
    bool match_all_ = false;
    std::vector<std::string> labels_;
};

std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

/// Lowercases and strips a trailing root dot.
std::string normalize_host(std::string_view host);

}  // namespace clawtrap
