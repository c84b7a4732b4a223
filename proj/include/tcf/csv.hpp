#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcf/tensor.hpp"

namespace tcf {

/// Header row plus comma-separated float rows. Raw field text is kept so
/// output rows reproduce the input exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> fields;
  Tensor values;  // rows x columns
};

CsvTable parse_csv(const std::string& text);
CsvTable load_csv(const std::string& path);

/// Input rows with an extra integer column appended.
std::string csv_with_column(const CsvTable& table, const std::string& name, const std::vector<std::int32_t>& column);

}  // namespace tcf
