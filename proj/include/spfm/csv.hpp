// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spfm/types.hpp"

namespace spfm::io {

// Minimal CSV: comma-separated, header row, '\n' line endings, no quoting
// (all emitted values are numeric or simple identifiers). Doubles are
// written with 17 significant digits so files are byte-stable and values
// round-trip exactly.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // InputError if absent
};

std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);

double cell_double(const Table& t, std::size_t row, int col);

}  // namespace spfm::io
