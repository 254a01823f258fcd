#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zonecast::csv {

/// Formats with up to `digits` significant digits (printf %g), locale-free.
std::string fmt_double(double v, int digits = 12);

std::optional<std::int64_t> parse_i64(std::string_view s);
std::optional<double> parse_double(std::string_view s);

/// Streaming CSV reader. Lines starting with '#' are metadata comments and
/// are skipped transparently. Fields are plain comma-separated (no quoting;
/// none of the pipeline formats need it). Field views stay valid until the
/// next call to next().
class Reader {
public:
    explicit Reader(const std::string& path);
    ~Reader();
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    /// Header row (first non-comment line). Empty if the file had none.
    const std::vector<std::string>& header() const { return header_; }

    /// Column index for name, or -1.
    int column(std::string_view name) const;

    bool next(std::vector<std::string_view>& fields);

    std::size_t data_lines_read() const { return data_lines_; }
    const std::string& path() const { return path_; }

private:
    bool read_raw_line();

    std::string path_;
    std::FILE* file_ = nullptr;
    std::vector<char> buf_;
    std::string line_;
    std::vector<std::string> header_;
    std::size_t data_lines_ = 0;
};

/// Buffered CSV writer. Every file starts with a '#' metadata line followed
/// by the header row.
class Writer {
public:
    Writer(const std::string& path, const std::string& meta_line, const std::string& header);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void write_line(std::string_view line);

    /// Appends raw bytes (caller supplies the trailing newline).
    void write_raw(const char* data, std::size_t len);

    void close();

private:
    std::string path_;
    std::FILE* file_ = nullptr;
    std::vector<char> buf_;
};

/// Splits one line in place into string views; clears `out` first.
void split_fields(std::string_view line, std::vector<std::string_view>& out);

}  // namespace zonecast::csv
