#pragma once

#include <string>
#include <vector>

namespace invseq {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Fixed 6-significant-digit form used by reports.
std::string format_sig6(double v);

double parse_double(const std::string& s);
long parse_long(const std::string& s);

std::vector<std::string> split_ws(const std::string& line);

// Line reader that tracks line numbers for parse errors.
class LineReader {
public:
    explicit LineReader(const std::string& path);
    // Next non-empty line; throws ParseError at end of file when required.
    std::string expect_line(const char* what);
    bool next_line(std::string& out);
    long line_number() const { return line_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::vector<std::string> lines_;
    std::size_t pos_ = 0;
    long line_ = 0;
};

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace invseq
