#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dualaug {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

// Plain comma-separated text, no quoting. Throws ParseError on an empty
// table or ragged rows.
CsvTable parse_csv(const std::string& text);

// Line chart against the "step" column when present, otherwise one bar
// panel per numeric column with a bar per row.
std::string render_svg(const CsvTable& table, const std::string& title = "");

void plot_csv(const std::string& csv_path, const std::string& svg_path);

}  // namespace dualaug
