#pragma once

#include <string>
#include <vector>

namespace sdgm::app {

/// Comma-separated table with a required header row. Fields may be quoted
/// with '"' (doubled inside quotes); CRLF line endings are accepted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ConfigError naming the column and file.
  std::size_t column(const std::string& name) const;
  /// Whole column parsed as numbers; throws ConfigError with row and column on bad text.
  std::vector<double> numeric(const std::string& name) const;

  std::string source;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv(const std::string& path);

std::string write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

}  // namespace sdgm::app
