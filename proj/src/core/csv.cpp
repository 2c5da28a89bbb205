#include "ioev/core/csv.hpp"

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev {

std::optional<size_t> CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (field_started || !field.empty() || !record.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                field.clear();
                record.clear();
                field_started = false;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) fail(ErrorCode::ParseError, "unterminated quoted CSV field");
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
    auto records = parse_records(text);
    CsvTable table;
    if (records.empty()) return table;
    table.header = std::move(records.front());
    for (auto& h : table.header) h = trim(h);
    for (size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            fail(ErrorCode::ParseError, "CSV row " + std::to_string(r) + " has " +
                                            std::to_string(records[r].size()) + " cells, expected " +
                                            std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

std::string format_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += quote(row[i]);
        }
        out.push_back('\n');
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

}  // namespace ioev
