#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fingersim/errors.hpp"

namespace fingersim::csvio {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Plain numeric CSV: comma separator, '\n' line endings, shortest round-trip
// number formatting, no quoting (headers must not contain commas).
void write_table(const std::filesystem::path& path, const Table& table);

// Throws IoError if unreadable, ValidationError on ragged rows or non-numeric
// cells (with row/column provenance).
Table read_table(const std::filesystem::path& path);

}  // namespace fingersim::csvio
