// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace spfm::io {

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw InputError("csv: no column named '" + name + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) out << ',';
    out << t.header[i];
  }
  out << '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size())
      throw InternalError("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw InputError("write failed: " + path.string());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open csv: " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty csv: " + path.string());
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw InputError("csv row width mismatch in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

double cell_double(const Table& t, std::size_t row, int col) {
  const std::string& s = t.rows.at(row).at(static_cast<std::size_t>(col));
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw InputError("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError("csv: bad numeric cell '" + s + "'");
  }
}

}  // namespace spfm::io
