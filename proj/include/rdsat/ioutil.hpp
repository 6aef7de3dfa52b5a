#pragma once

// Small file and number-formatting helpers shared by the serialization
// paths.  All floating-point output goes through fmt17 so emitted files are
// byte-stable and round-trip safe.

#include <string>
#include <vector>

namespace rdsat {

std::string fmt17(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // throws parse_error if unreadable
std::vector<std::string> split_lines(const std::string& text);

}  // namespace rdsat
