#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "edr/common.hpp"
#include "edr/data.hpp"

/// Dataset interchange: a header row `x0,...,x{D-1}[,y][,group]` followed by
/// one row per sample, '.' decimals, LF line endings. Doubles are written in
/// shortest round-trip form.
namespace edr::csv {

struct Table {
  Matrix x;
  std::optional<Vector> y;
  std::optional<Vector> group;  // 0/1
};

/// Throws InputError with the line number on malformed input.
Table parse(std::istream& in, const std::string& source = "<stream>");
Table read(const std::filesystem::path& path);

void write(std::ostream& out, const Table& table);
void write(const std::filesystem::path& path, const Table& table);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Writes train.csv (x, y), test.csv (x), holdout.csv (x, y) into dir.
void write_pair(const std::filesystem::path& dir, const TrainTestPair& pair);

/// Reads the three files written by write_pair.
TrainTestPair read_pair(const std::filesystem::path& dir);

}  // namespace edr::csv
