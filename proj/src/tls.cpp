#include "clawtrap/tls.hpp"

#include "clawtrap/net.hpp"

#include <openssl/bn.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509v3.h>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace clawtrap {

namespace {

struct BioDeleter {
    void operator()(BIO* bio) const { BIO_free(bio); }
};
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

X509Ptr read_cert_file(const std::string& path) {
    BioPtr bio(BIO_new_file(path.c_str(), "r"));
    if (!bio) return nullptr;
    return X509Ptr(PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr));
}

EvpKeyPtr read_key_file(const std::string& path) {
    BioPtr bio(BIO_new_file(path.c_str(), "r"));
    if (!bio) return nullptr;
    return EvpKeyPtr(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
}

std::string bio_to_string(BIO* bio) {
    char* data = nullptr;
    const long len = BIO_get_mem_data(bio, &data);
    return std::string(data, static_cast<std::size_t>(len));
}

void set_random_serial(X509* cert) {
    unsigned char bytes[16];
    RAND_bytes(bytes, sizeof bytes);
    bytes[0] &= 0x7f;  // positive
    bytes[0] |= 0x01;  // and never zero
    BIGNUM* bn = BN_bin2bn(bytes, sizeof bytes, nullptr);
    BN_to_ASN1_INTEGER(bn, X509_get_serialNumber(cert));
    BN_free(bn);
}

void add_extension(X509* cert, X509* issuer, int nid, const char* value) {
    X509V3_CTX ctx;
    X509V3_set_ctx_nodb(&ctx);
    X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
    if (!ext) throw std::runtime_error("cannot build certificate extension: " + last_ssl_error());
    X509_add_ext(cert, ext, -1);
    X509_EXTENSION_free(ext);
}

void set_common_name(X509_NAME* name, const std::string& cn) {
    // CN is limited to 64 characters; the SAN carries the full name.
    const std::string value = cn.substr(0, 64);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8, reinterpret_cast<const unsigned char*>(value.c_str()), -1,
                               -1, 0);
}

bool write_file_atomically(const std::filesystem::path& target, const std::string& content, mode_t mode,
                           std::string& error) {
    auto tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, mode);
    if (fd < 0) {
        error = "cannot create " + tmp.string() + ": " + std::strerror(errno);
        return false;
    }
    ::fchmod(fd, mode);
    std::size_t off = 0;
    bool ok = true;
    while (off < content.size()) {
        const auto n = ::write(fd, content.data() + off, content.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ok = false;
            break;
        }
        off += static_cast<std::size_t>(n);
    }
    ok = ok && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok || ::rename(tmp.c_str(), target.c_str()) != 0) {
        error = "cannot write " + target.string() + ": " + std::strerror(errno);
        ::unlink(tmp.c_str());
        return false;
    }
    return true;
}

}  // namespace

std::string last_ssl_error() {
    const unsigned long code = ERR_get_error();
    if (code == 0) return "unknown TLS error";
    char buf[256];
    ERR_error_string_n(code, buf, sizeof buf);
    ERR_clear_error();
    return buf;
}

std::optional<std::string> check_ca_files(const std::string& cert_path, const std::string& key_path) {
    auto cert = read_cert_file(cert_path);
    if (!cert) return "cannot read CA certificate " + cert_path;
    auto key = read_key_file(key_path);
    if (!key) return "cannot read CA key " + key_path;
    if (X509_check_private_key(cert.get(), key.get()) != 1) {
        ERR_clear_error();
        return "CA certificate and key do not match";
    }
    if (X509_check_ca(cert.get()) == 0) return "certificate " + cert_path + " is not a CA";
    return std::nullopt;
}

CaPem generate_ca(int valid_days, const std::string& common_name) {
    EvpKeyPtr key(EVP_RSA_gen(2048));
    if (!key) throw std::runtime_error("RSA key generation failed: " + last_ssl_error());
    X509Ptr cert(X509_new());
    X509_set_version(cert.get(), 2);
    set_random_serial(cert.get());
    X509_gmtime_adj(X509_getm_notBefore(cert.get()), 0);
    X509_gmtime_adj(X509_getm_notAfter(cert.get()), static_cast<long>(valid_days) * 24 * 3600);
    X509_set_pubkey(cert.get(), key.get());
    X509_NAME* name = X509_get_subject_name(cert.get());
    set_common_name(name, common_name);
    X509_set_issuer_name(cert.get(), name);
    add_extension(cert.get(), cert.get(), NID_basic_constraints, "critical,CA:TRUE");
    add_extension(cert.get(), cert.get(), NID_key_usage, "critical,keyCertSign,cRLSign");
    add_extension(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
    if (X509_sign(cert.get(), key.get(), EVP_sha256()) == 0) {
        throw std::runtime_error("CA signing failed: " + last_ssl_error());
    }
    CaPem out;
    out.cert_pem = to_pem(cert.get());
    BioPtr bio(BIO_new(BIO_s_mem()));
    PEM_write_bio_PrivateKey(bio.get(), key.get(), nullptr, nullptr, 0, nullptr, nullptr);
    out.key_pem = bio_to_string(bio.get());
    return out;
}

WriteCaStatus write_ca_files(const std::filesystem::path& dir, const CaPem& ca, bool force, std::string& error) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        error = "cannot create " + dir.string() + ": " + ec.message();
        return WriteCaStatus::io_error;
    }
    const auto cert_path = dir / kCaCertFile;
    const auto key_path = dir / kCaKeyFile;
    if (!force) {
        for (const auto& p : {cert_path, key_path}) {
            if (std::filesystem::exists(p)) {
                error = p.string() + " already exists (use --force to overwrite)";
                return WriteCaStatus::exists;
            }
        }
    }
    if (!write_file_atomically(key_path, ca.key_pem, 0600, error)) return WriteCaStatus::io_error;
    if (!write_file_atomically(cert_path, ca.cert_pem, 0644, error)) {
        std::filesystem::remove(key_path, ec);
        return WriteCaStatus::io_error;
    }
    return WriteCaStatus::ok;
}

std::string certificate_serial_hex(const X509* cert) {
    BIGNUM* bn = ASN1_INTEGER_to_BN(X509_get0_serialNumber(cert), nullptr);
    char* hex = BN_bn2hex(bn);
    std::string out(hex);
    OPENSSL_free(hex);
    BN_free(bn);
    return out;
}

std::string to_pem(X509* cert) {
    BioPtr bio(BIO_new(BIO_s_mem()));
    PEM_write_bio_X509(bio.get(), cert);
    return bio_to_string(bio.get());
}

std::unique_ptr<CertificateAuthority> CertificateAuthority::load(const std::string& cert_path,
                                                                 const std::string& key_path) {
    if (auto problem = check_ca_files(cert_path, key_path)) throw std::runtime_error(*problem);
    return std::unique_ptr<CertificateAuthority>(
        new CertificateAuthority(read_cert_file(cert_path), read_key_file(key_path)));
}

std::unique_ptr<CertificateAuthority> CertificateAuthority::from_pem(const CaPem& pem) {
    BioPtr cert_bio(BIO_new_mem_buf(pem.cert_pem.data(), static_cast<int>(pem.cert_pem.size())));
    BioPtr key_bio(BIO_new_mem_buf(pem.key_pem.data(), static_cast<int>(pem.key_pem.size())));
    X509Ptr cert(PEM_read_bio_X509(cert_bio.get(), nullptr, nullptr, nullptr));
    EvpKeyPtr key(PEM_read_bio_PrivateKey(key_bio.get(), nullptr, nullptr, nullptr));
    if (!cert || !key || X509_check_private_key(cert.get(), key.get()) != 1) {
        throw std::runtime_error("invalid CA material: " + last_ssl_error());
    }
    return std::unique_ptr<CertificateAuthority>(new CertificateAuthority(std::move(cert), std::move(key)));
}

std::shared_ptr<const LeafCertificate> CertificateAuthority::leaf_for(const std::string& host) {
    const auto key = normalize_host(host);
    std::lock_guard lock(mu_);
    if (const auto it = leaves_.find(key); it != leaves_.end()) return it->second;
    auto leaf = generate_leaf(key);
    leaves_.emplace(key, leaf);
    return leaf;
}

std::size_t CertificateAuthority::cached_leaves() const {
    std::lock_guard lock(mu_);
    return leaves_.size();
}

std::shared_ptr<const LeafCertificate> CertificateAuthority::generate_leaf(const std::string& host) const {
    EvpKeyPtr key(EVP_EC_gen("P-256"));
    if (!key) throw std::runtime_error("leaf key generation failed: " + last_ssl_error());
    X509Ptr cert(X509_new());
    X509_set_version(cert.get(), 2);
    set_random_serial(cert.get());
    X509_gmtime_adj(X509_getm_notBefore(cert.get()), -24 * 3600);
    X509_gmtime_adj(X509_getm_notAfter(cert.get()), 365L * 24 * 3600);
    X509_set_pubkey(cert.get(), key.get());
    set_common_name(X509_get_subject_name(cert.get()), host);
    X509_set_issuer_name(cert.get(), X509_get_subject_name(cert_.get()));
    const std::string san = (IpAddress::parse(host) ? "IP:" : "DNS:") + host;
    add_extension(cert.get(), cert_.get(), NID_subject_alt_name, san.c_str());
    add_extension(cert.get(), cert_.get(), NID_basic_constraints, "critical,CA:FALSE");
    add_extension(cert.get(), cert_.get(), NID_key_usage, "critical,digitalSignature,keyEncipherment");
    add_extension(cert.get(), cert_.get(), NID_ext_key_usage, "serverAuth");
    add_extension(cert.get(), cert_.get(), NID_subject_key_identifier, "hash");
    add_extension(cert.get(), cert_.get(), NID_authority_key_identifier, "keyid:always");
    if (X509_sign(cert.get(), key_.get(), EVP_sha256()) == 0) {
        throw std::runtime_error("leaf signing failed: " + last_ssl_error());
    }

    SslCtxPtr ctx(SSL_CTX_new(TLS_server_method()), SSL_CTX_free);
    if (!ctx) throw std::runtime_error("cannot create TLS server context: " + last_ssl_error());
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
    if (SSL_CTX_use_certificate(ctx.get(), cert.get()) != 1 || SSL_CTX_use_PrivateKey(ctx.get(), key.get()) != 1) {
        throw std::runtime_error("cannot install leaf certificate: " + last_ssl_error());
    }
    SSL_CTX_add1_chain_cert(ctx.get(), cert_.get());

    auto leaf = std::make_shared<LeafCertificate>();
    leaf->host = host;
    leaf->cert = std::move(cert);
    leaf->context = std::move(ctx);
    return leaf;
}

InterceptDecision establish_tls_intercept(const std::string& connect_host, const TlsPolicy& policy,
                                          CertificateAuthority* ca) {
    InterceptDecision decision;
    if (policy.mode != TlsMode::intercept || ca == nullptr) return decision;
    const auto host = normalize_host(connect_host);
    for (const auto& pattern : policy.intercept_hosts) {
        const auto glob = HostGlob::compile(pattern);
        if (glob && glob->matches(host)) {
            decision.kind = InterceptDecision::Kind::intercept;
            decision.leaf = ca->leaf_for(host);
            return decision;
        }
    }
    return decision;
}

SslCtxPtr make_client_context(const TlsPolicy& policy) {
    SslCtxPtr ctx(SSL_CTX_new(TLS_client_method()), SSL_CTX_free);
    if (!ctx) throw std::runtime_error("cannot create TLS client context: " + last_ssl_error());
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
    SSL_CTX_set_default_verify_paths(ctx.get());
    if (!policy.upstream_ca_path.empty() &&
        SSL_CTX_load_verify_locations(ctx.get(), policy.upstream_ca_path.c_str(), nullptr) != 1) {
        throw std::runtime_error("cannot load upstream CA bundle " + policy.upstream_ca_path);
    }
    SSL_CTX_set_verify(ctx.get(), policy.upstream_verify ? SSL_VERIFY_PEER : SSL_VERIFY_NONE, nullptr);
    static const unsigned char kAlpn[] = {8, 'h', 't', 't', 'p', '/', '1', '.', '1'};
    SSL_CTX_set_alpn_protos(ctx.get(), kAlpn, sizeof kAlpn);
    return ctx;
}

}  // namespace clawtrap
