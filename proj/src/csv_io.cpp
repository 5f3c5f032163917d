#include "fingersim/csv_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fingersim/num_io.hpp"

namespace fingersim::csvio {

void write_table(const std::filesystem::path& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    std::string line;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i > 0) line += ',';
        line += table.header[i];
    }
    line += '\n';
    out << line;
    const std::size_t width = table.header.size();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != width) {
            throw ValidationError(fmt::format(
                "csv write '{}': row {} has {} cells, header has {}", path.string(), r,
                row.size(), width));
        }
        line.clear();
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) line += ',';
            line += format_double(row[c]);
        }
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out) {
        throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    Table table;
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(fmt::format("csv '{}': missing header line", path.string()));
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            table.header.push_back(cell);
        }
    }
    if (table.header.empty()) {
        throw ValidationError(fmt::format("csv '{}': empty header", path.string()));
    }

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(table.header.size());
        std::size_t start = 0;
        std::size_t col = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size() : comma) - start);
            row.push_back(parse_double(
                cell, fmt::format("csv '{}' line {} column {}", path.string(), lineno, col + 1)));
            ++col;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (row.size() != table.header.size()) {
            throw ValidationError(fmt::format(
                "csv '{}' line {}: {} cells, expected {}", path.string(), lineno, row.size(),
                table.header.size()));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace fingersim::csvio
