#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace clawtrap {

/// Append-only sink of newline-delimited records.
class LineSink {
public:
    virtual ~LineSink() = default;
    /// Durably appends one line (without terminator). False leaves the sink unchanged.
    virtual bool append(std::string_view line) = 0;
};

/// O_APPEND file; every line is fdatasync'ed before append() returns.
class DurableLineFile final : public LineSink {
public:
    /// Throws std::runtime_error when the file cannot be opened.
    explicit DurableLineFile(const std::filesystem::path& path);
    ~DurableLineFile() override;
    DurableLineFile(const DurableLineFile&) = delete;
    DurableLineFile& operator=(const DurableLineFile&) = delete;

    bool append(std::string_view line) override;

private:
    int fd_ = -1;
};

class MemoryLineSink final : public LineSink {
public:
    bool append(std::string_view line) override;
    std::vector<std::string> lines() const;
    void set_failing(bool failing);

private:
    mutable std::mutex mu_;
    std::vector<std::string> lines_;
    bool failing_ = false;
};

/// Reads a line file, truncating a torn (unterminated) final line in place. Returns the
/// complete lines. A missing file reads as empty.
std::vector<std::string> recover_line_file(const std::filesystem::path& path);

/// Complete lines of a file without modifying it.
std::vector<std::string> read_complete_lines(const std::filesystem::path& path);

}  // namespace clawtrap
