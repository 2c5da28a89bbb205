#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ioev {

// A header-plus-rows table of raw string cells, as read from a CSV export.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<size_t> column(const std::string& name) const;
};

// RFC 4180 style: comma separated, double-quote escaping, CRLF tolerated.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);
std::string format_csv(const CsvTable& table);

}  // namespace ioev
