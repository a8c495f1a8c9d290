#include "ratlim/report.hpp"

#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <sstream>

namespace ratlim {

std::string format_real(Real v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int digits = 18; digits < 21; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*Lg", digits, v);
    if (std::strtold(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.21Lg", v);
  return buf;
}

std::string csv_quote(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json json_real(Real v) {
  if (!std::isfinite(v)) return nullptr;
  return static_cast<double>(v);
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw ValidationError("row width does not match the table columns");
  rows.push_back(std::move(row));
}

namespace {

std::string cell_text(const Cell& c) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return csv_quote(s); }
    std::string operator()(Real v) const { return format_real(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
  };
  return std::visit(Visitor{}, c);
}

nlohmann::json cell_json(const Cell& c) {
  struct Visitor {
    nlohmann::json operator()(const std::string& s) const { return s; }
    nlohmann::json operator()(Real v) const { return json_real(v); }
    nlohmann::json operator()(std::int64_t v) const { return v; }
    nlohmann::json operator()(bool v) const { return v; }
  };
  return std::visit(Visitor{}, c);
}

}  // namespace

std::string Table::to_csv() const {
  std::ostringstream os;
  os << "# schema: 1\n";
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << csv_quote(columns[i]);
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
    os << "\n";
  }
  return os.str();
}

nlohmann::json Table::to_json() const {
  nlohmann::json j;
  j["schema"] = 1;
  for (const auto& [k, v] : meta) j[k] = v;
  j["columns"] = columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[columns[i]] = cell_json(row[i]);
    j["rows"].push_back(std::move(r));
  }
  return j;
}

}  // namespace ratlim
