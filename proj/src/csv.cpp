#include "tcf/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tcf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> data;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                               " fields, found " + std::to_string(cells.size()));
    }
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const float v = std::strtof(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || errno == ERANGE || !std::isfinite(v)) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": '" + c + "' is not a finite number");
      }
      data.push_back(v);
    }
    t.fields.push_back(std::move(cells));
  }
  if (t.header.empty()) throw std::runtime_error("csv has no header row");
  if (t.fields.empty()) throw std::runtime_error("csv has no data rows");
  t.values = Tensor({t.fields.size(), t.header.size()}, std::move(data));
  return t;
}

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string csv_with_column(const CsvTable& table, const std::string& name, const std::vector<std::int32_t>& column) {
  if (column.size() != table.fields.size()) throw std::invalid_argument("csv column length mismatch");
  std::ostringstream out;
  for (const auto& h : table.header) out << h << ',';
  out << name << '\n';
  for (std::size_t i = 0; i < table.fields.size(); ++i) {
    for (const auto& f : table.fields[i]) out << f << ',';
    out << column[i] << '\n';
  }
  return out.str();
}

}  // namespace tcf
