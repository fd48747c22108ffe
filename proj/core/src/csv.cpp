#include "edr/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace edr::csv {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Table parse(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(source, 1, "empty file (missing header)");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split(line);
  Index d = 0;
  while (d < static_cast<Index>(header.size()) &&
         header[static_cast<std::size_t>(d)] == "x" + std::to_string(d))
    ++d;
  if (d == 0) fail(source, line_no, "header must start with x0");
  bool has_y = false, has_group = false;
  std::size_t col = static_cast<std::size_t>(d);
  if (col < header.size() && header[col] == "y") {
    has_y = true;
    ++col;
  }
  if (col < header.size() && header[col] == "group") {
    has_group = true;
    ++col;
  }
  if (col != header.size())
    fail(source, line_no, "unexpected header column '" + std::string(header[col]) + "'");
  const std::size_t width = header.size();

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != width)
      fail(source, line_no,
           "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    for (const auto f : fields) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
        fail(source, line_no, "bad number '" + std::string(f) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) fail(source, line_no, "no data rows");

  Table t;
  t.x.resize(rows, d);
  if (has_y) t.y = Vector(rows);
  if (has_group) t.group = Vector(rows);
  for (Index r = 0; r < rows; ++r) {
    const double* row = values.data() + static_cast<std::size_t>(r) * width;
    for (Index j = 0; j < d; ++j) t.x(r, j) = row[j];
    std::size_t c = static_cast<std::size_t>(d);
    if (has_y) (*t.y)(r) = row[c++];
    if (has_group) {
      const double g = row[c];
      if (g != 0.0 && g != 1.0)
        fail(source, static_cast<std::size_t>(r) + 2, "group must be 0 or 1");
      (*t.group)(r) = g;
    }
  }
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse(in, path.string());
}

void write(std::ostream& out, const Table& table) {
  const Index d = table.x.cols();
  const Index n = table.x.rows();
  require(!table.y || table.y->size() == n, "csv::write: y length mismatch");
  require(!table.group || table.group->size() == n, "csv::write: group length mismatch");
  for (Index j = 0; j < d; ++j) out << (j ? "," : "") << 'x' << j;
  if (table.y) out << ",y";
  if (table.group) out << ",group";
  out << '\n';
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) out << (j ? "," : "") << format_double(table.x(i, j));
    if (table.y) out << ',' << format_double((*table.y)(i));
    if (table.group) out << ',' << format_double((*table.group)(i));
    out << '\n';
  }
}

void write(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write(out, table);
  if (!out) throw InputError("write failed: " + path.string());
}

void write_pair(const std::filesystem::path& dir, const TrainTestPair& pair) {
  std::filesystem::create_directories(dir);
  write(dir / "train.csv", Table{pair.x_train, pair.y_train, std::nullopt});
  write(dir / "test.csv", Table{pair.x_test, std::nullopt, std::nullopt});
  write(dir / "holdout.csv", Table{pair.x_holdout, pair.y_holdout, std::nullopt});
}

TrainTestPair read_pair(const std::filesystem::path& dir) {
  const Table train = read(dir / "train.csv");
  const Table test = read(dir / "test.csv");
  const Table hold = read(dir / "holdout.csv");
  if (!train.y) throw InputError((dir / "train.csv").string() + ": missing y column");
  if (!hold.y) throw InputError((dir / "holdout.csv").string() + ": missing y column");
  TrainTestPair p;
  p.x_train = train.x;
  p.y_train = *train.y;
  p.x_test = test.x;
  p.x_holdout = hold.x;
  p.y_holdout = *hold.y;
  p.generator = "csv";
  p.validate();
  return p;
}

}  // namespace edr::csv
