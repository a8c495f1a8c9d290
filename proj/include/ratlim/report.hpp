#pragma once

#include "ratlim/numeric.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ratlim {

// Shortest round-trip text for a long double ("nan", "inf" and "-inf" for non-finite values).
std::string format_real(Real v);
std::string csv_quote(const std::string& text);
// Finite values as JSON numbers (double), non-finite as null.
nlohmann::json json_real(Real v);

using Cell = std::variant<std::string, Real, std::int64_t, bool>;

// Column-oriented report with a metadata header; CSV carries the metadata as "# key: value" lines.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_meta(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }
  void add_row(std::vector<Cell> row);

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

}  // namespace ratlim
