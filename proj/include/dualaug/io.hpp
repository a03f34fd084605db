#pragma once

#include <string>

namespace dualaug {

std::string read_text_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_text_file_atomic(const std::string& path, const std::string& content);

// printf("%.17g") style formatting; round-trips every finite double.
std::string format_double(double value);

}  // namespace dualaug
