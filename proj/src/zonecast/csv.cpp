#include "zonecast/csv.hpp"

#include <charconv>
#include <cstring>

#include "zonecast/errors.hpp"

namespace zonecast::csv {

std::string fmt_double(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

std::optional<std::int64_t> parse_i64(std::string_view s) {
    std::int64_t v = 0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

void split_fields(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

Reader::Reader(const std::string& path) : path_(path), buf_(1 << 20) {
    file_ = std::fopen(path.c_str(), "rb");
    if (!file_) throw FormatError("cannot open CSV file: " + path);
    std::setvbuf(file_, buf_.data(), _IOFBF, buf_.size());
    while (read_raw_line()) {
        if (!line_.empty() && line_[0] == '#') continue;
        std::vector<std::string_view> fields;
        split_fields(line_, fields);
        header_.assign(fields.begin(), fields.end());
        break;
    }
}

Reader::~Reader() {
    if (file_) std::fclose(file_);
}

int Reader::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return static_cast<int>(i);
    return -1;
}

bool Reader::read_raw_line() {
    line_.clear();
    char chunk[4096];
    while (std::fgets(chunk, sizeof(chunk), file_)) {
        line_ += chunk;
        if (!line_.empty() && line_.back() == '\n') break;
    }
    if (line_.empty()) return false;
    while (!line_.empty() && (line_.back() == '\n' || line_.back() == '\r')) line_.pop_back();
    return true;
}

bool Reader::next(std::vector<std::string_view>& fields) {
    while (read_raw_line()) {
        if (!line_.empty() && line_[0] == '#') continue;
        if (line_.empty()) continue;
        split_fields(line_, fields);
        ++data_lines_;
        return true;
    }
    return false;
}

Writer::Writer(const std::string& path, const std::string& meta_line, const std::string& header)
    : path_(path), buf_(1 << 20) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw Error("cannot open file for writing: " + path);
    std::setvbuf(file_, buf_.data(), _IOFBF, buf_.size());
    std::string head = meta_line;
    if (head.empty() || head[0] != '#') head = "# " + head;
    head += '\n';
    head += header;
    head += '\n';
    write_raw(head.data(), head.size());
}

Writer::~Writer() {
    if (file_) {
        std::fclose(file_);  // errors ignored; call close() for checked flushing
        file_ = nullptr;
    }
}

void Writer::write_line(std::string_view line) {
    write_raw(line.data(), line.size());
    const char nl = '\n';
    write_raw(&nl, 1);
}

void Writer::write_raw(const char* data, std::size_t len) {
    if (std::fwrite(data, 1, len, file_) != len) throw Error("write failed: " + path_);
}

void Writer::close() {
    if (file_) {
        if (std::fclose(file_) != 0) throw Error("close failed: " + path_);
        file_ = nullptr;
    }
}

}  // namespace zonecast::csv
