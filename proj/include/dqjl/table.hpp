#pragma once

// Comma-separated tables and number formatting shared by every file writer.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dqjl {

/// Shortest decimal form that still round-trips: "%.17g".
std::string format_exact(double value);

/// Compact "%.6g" form for human-facing output.
std::string format_short(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;

  /// Index of a header column; throws IoError when absent.
  std::size_t column(std::string_view name) const;
};

/// Parses a headered comma-separated file. No quoting support; fields are
/// plain numbers or identifiers.
CsvTable read_csv(const std::filesystem::path& path);

/// Strict double parse; throws IoError naming the field on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dqjl
