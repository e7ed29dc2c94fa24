#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace flashcomm {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

enum class TableFormat { Csv, Json };

TableFormat parse_table_format(const std::string& name);

// Doubles use the shortest representation that round-trips; non-finite
// values print as inf/-inf/nan in CSV and null in JSON.
std::string to_csv(const Table& table);
nlohmann::ordered_json to_json(const Table& table);
std::string render(const Table& table, TableFormat format);

// Writes to `path`, or to stdout when path is empty or "-".
void emit_table(const Table& table, TableFormat format, const std::string& path);

}  // namespace flashcomm
