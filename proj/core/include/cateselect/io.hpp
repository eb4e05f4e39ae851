#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cateselect::io {

// Minimal CSV: header row, comma separated, no quoting (all fields numeric
// or bare identifiers).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position by name; throws ValidationError naming the column.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never observe a
// partially written file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace cateselect::io
