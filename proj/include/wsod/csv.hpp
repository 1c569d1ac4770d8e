#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "wsod/errors.hpp"

namespace wsod {

/// Shortest round-trip decimal rendering, so equal doubles always produce
/// identical text and reruns yield byte-identical files.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw IoError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

/// Minimal CSV emitter for the result tables. Values are numbers and
/// identifier-like names, so no quoting is needed; a comma in a cell is a bug.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw IoError("csv: cannot open " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find(',') != std::string::npos ||
          cells[i].find('\n') != std::string::npos) {
        throw IoError("csv: cell contains a separator: " + cells[i]);
      }
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("csv: write failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

/// Comma-splitting reader for files this library wrote (no quoting dialect).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace wsod
