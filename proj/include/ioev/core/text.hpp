#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ioev {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Lower-hex rendering of raw bytes.
std::string to_hex(std::string_view bytes);

}  // namespace ioev
