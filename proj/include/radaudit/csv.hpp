#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace radaudit {

// A parsed comma-separated table. Fields may be double-quoted (RFC 4180);
// CRLF line endings are accepted. Blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

CsvTable parse_csv(std::string_view text, std::string_view origin);

// Quotes a field only when it contains a separator, quote or newline.
std::string csv_field(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Parses a whole token as a double; returns false on trailing garbage.
bool parse_double(std::string_view token, double& out);
bool parse_int(std::string_view token, long long& out);

// Reads a file as bytes; InputError naming the path when unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace radaudit
