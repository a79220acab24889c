#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace clawtrap {

enum class InflateStatus { ok, corrupt, too_large };

/// Decodes a gzip (or zlib-wrapped) stream. Output beyond `max_bytes` yields too_large.
InflateStatus gunzip(std::string_view in, std::size_t max_bytes, std::string& out);
/// HTTP "deflate": zlib-wrapped per the RFC, with a raw-deflate fallback for broken servers.
InflateStatus inflate_deflate(std::string_view in, std::size_t max_bytes, std::string& out);

std::string gzip_compress(std::string_view in);

std::string base64_encode(std::string_view in);
std::optional<std::string> base64_decode(std::string_view in);

bool is_valid_utf8(std::string_view text);

}  // namespace clawtrap
