#include "clawtrap/line_file.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clawtrap {

DurableLineFile::DurableLineFile(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
}

DurableLineFile::~DurableLineFile() {
    if (fd_ >= 0) ::close(fd_);
}

bool DurableLineFile::append(std::string_view line) {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) return false;
    std::string data(line);
    data.push_back('\n');
    std::string_view rest(data);
    while (!rest.empty()) {
        const auto n = ::write(fd_, rest.data(), rest.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            // Roll back a torn write so a retry cannot glue two records together.
            [[maybe_unused]] const int rc = ::ftruncate(fd_, st.st_size);
            return false;
        }
        rest.remove_prefix(static_cast<std::size_t>(n));
    }
    return ::fdatasync(fd_) == 0;
}

bool MemoryLineSink::append(std::string_view line) {
    std::lock_guard lock(mu_);
    if (failing_) return false;
    lines_.emplace_back(line);
    return true;
}

std::vector<std::string> MemoryLineSink::lines() const {
    std::lock_guard lock(mu_);
    return lines_;
}

void MemoryLineSink::set_failing(bool failing) {
    std::lock_guard lock(mu_);
    failing_ = failing;
}

namespace {

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    if (in) buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_complete(const std::string& content) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (true) {
        const auto nl = content.find('\n', start);
        if (nl == std::string::npos) break;
        lines.push_back(content.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace

std::vector<std::string> recover_line_file(const std::filesystem::path& path) {
    const auto content = read_all(path);
    if (!content.empty() && content.back() != '\n') {
        const auto keep = content.rfind('\n');
        std::error_code ec;
        std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1, ec);
        if (ec) throw std::runtime_error("cannot repair " + path.string() + ": " + ec.message());
    }
    return split_complete(content);
}

std::vector<std::string> read_complete_lines(const std::filesystem::path& path) {
    return split_complete(read_all(path));
}

}  // namespace clawtrap
