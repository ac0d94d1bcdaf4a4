#include "sdgm/app/csv.hpp"

#include <fstream>
#include <sstream>

#include "sdgm/error.hpp"
#include "sdgm/format.hpp"

namespace sdgm::app {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no, const std::string& source) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw ConfigError(source + ":" + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw ConfigError(source + ": no column named '" + name + "'");
}

std::vector<double> CsvTable::numeric(const std::string& name) const {
  const std::size_t k = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double x = 0.0;
    if (!parse_double(rows[i][k], x)) {
      throw ConfigError(source + ": row " + std::to_string(i + 2) + ", column '" + name + "': '" + rows[i][k] +
                        "' is not a number");
    }
    out.push_back(x);
  }
  return out;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable table;
  table.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_record(line, line_no, source);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw ConfigError(source + ": missing header row");
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_csv(text.str(), path);
}

std::string write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_double(row[k]);
    out += "\n";
  }
  return out;
}

}  // namespace sdgm::app
