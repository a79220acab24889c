#pragma once

#include "clawtrap/config.hpp"

#include <openssl/ssl.h>
#include <openssl/x509.h>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace clawtrap {

struct X509Deleter {
    void operator()(X509* cert) const { X509_free(cert); }
};
struct EvpKeyDeleter {
    void operator()(EVP_PKEY* key) const { EVP_PKEY_free(key); }
};
using X509Ptr = std::unique_ptr<X509, X509Deleter>;
using EvpKeyPtr = std::unique_ptr<EVP_PKEY, EvpKeyDeleter>;
using SslCtxPtr = std::shared_ptr<SSL_CTX>;

inline constexpr const char* kCaCommonName = "ClawTrap Research CA";
inline constexpr const char* kCaCertFile = "clawtrap-ca.pem";
inline constexpr const char* kCaKeyFile = "clawtrap-ca-key.pem";

/// Describes why a CA cert/key pair is unusable, or nullopt when it is fine.
std::optional<std::string> check_ca_files(const std::string& cert_path, const std::string& key_path);

struct CaPem {
    std::string cert_pem;
    std::string key_pem;
};

/// Self-signed RSA-2048 CA.
CaPem generate_ca(int valid_days = 365, const std::string& common_name = kCaCommonName);

enum class WriteCaStatus { ok, exists, io_error };

/// Writes kCaCertFile and kCaKeyFile (mode 0600) into `dir`. Without `force`, nothing is
/// written when either file exists. Files appear only once fully written.
WriteCaStatus write_ca_files(const std::filesystem::path& dir, const CaPem& ca, bool force, std::string& error);

std::string certificate_serial_hex(const X509* cert);
std::string to_pem(X509* cert);

/// A synthesized server certificate and the server context presenting it.
struct LeafCertificate {
    std::string host;
    X509Ptr cert;
    SslCtxPtr context;
};

class CertificateAuthority {
public:
    /// Throws std::runtime_error when the files are missing or do not form a key pair.
    static std::unique_ptr<CertificateAuthority> load(const std::string& cert_path, const std::string& key_path);
    static std::unique_ptr<CertificateAuthority> from_pem(const CaPem& pem);

    /// Leaf for `host` (DNS name or IP literal), generated on first use and cached.
    std::shared_ptr<const LeafCertificate> leaf_for(const std::string& host);
    std::size_t cached_leaves() const;
    X509* certificate() const { return cert_.get(); }

private:
    CertificateAuthority(X509Ptr cert, EvpKeyPtr key) : cert_(std::move(cert)), key_(std::move(key)) {}
    std::shared_ptr<const LeafCertificate> generate_leaf(const std::string& host) const;

    X509Ptr cert_;
    EvpKeyPtr key_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<const LeafCertificate>> leaves_;
};

struct InterceptDecision {
    enum class Kind { tunnel, intercept };
    Kind kind = Kind::tunnel;
    std::shared_ptr<const LeafCertificate> leaf;  // set for intercept
};

/// Intercept when the policy says so and `connect_host` matches one of its globs.
InterceptDecision establish_tls_intercept(const std::string& connect_host, const TlsPolicy& policy,
                                          CertificateAuthority* ca);

/// Client context for upstream connections: HTTP/1.1 via ALPN, system trust plus the
/// policy's extra anchors, verification per policy.
SslCtxPtr make_client_context(const TlsPolicy& policy);

std::string last_ssl_error();

}  // namespace clawtrap
