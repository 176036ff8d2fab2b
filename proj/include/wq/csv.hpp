#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wq {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Index of a header column; throws DataError when absent.
  std::size_t column_index(std::string_view name) const;
};

// RFC 4180-ish reader: comma separated, double-quoted fields, header row required.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

std::string csv_escape(std::string_view field);
std::string format_fixed(double value, int decimals);
// Shortest text that round-trips the double.
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace wq
