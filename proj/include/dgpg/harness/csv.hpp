#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dgpg::harness {

// Small RFC 4180 style table. Fields containing a comma, quote or newline are
// quoted on write; numbers use the shortest text that parses back exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws std::out_of_range when absent.
  std::size_t column(std::string_view name) const;
  const std::string& at(std::size_t row, std::string_view name) const { return rows.at(row).at(column(name)); }
  double number(std::size_t row, std::string_view name) const;

  friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

std::string format_number(double v);
double parse_number(const std::string& s);

std::string to_csv_text(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

// Writes through a temporary file and a rename so readers never see a
// half-written table.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Same atomic write for arbitrary text.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dgpg::harness
