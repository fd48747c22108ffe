#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "edr/csv.hpp"
#include "edr/experiment.hpp"

namespace edr::experiment {

namespace {

using nlohmann::json;

// NaN (a method with no successful replicate) is stored as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fmt(double v) { return std::isfinite(v) ? csv::format_double(v) : ""; }

double parse_double(const std::string& s, std::size_t line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("raw.csv:" + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Commas and newlines would break the row.
std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',') ch = ';';
    else if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

constexpr const char* kRecordHeader =
    "method,n,replicate,seed,loss,ess,auc,lambda,iterations,projection,error";

// --- svg ----------------------------------------------------------------------

struct Panel {
  const char* title;
  double ReportRow::*value;
};

constexpr Panel kPanels[] = {
    {"loss / UW loss", &ReportRow::normalized_loss},
    {"ESS / UW ESS", &ReportRow::normalized_ess},
    {"loss std / UW loss", &ReportRow::normalized_loss_std},
};

const char* colour(const std::string& family) {
  if (family == "JP") return "#1f77b4";
  if (family == "UW") return "#444444";
  if (family == "IW") return "#d62728";
  if (family == "RP") return "#2ca02c";
  return "#9467bd";
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

json report_to_json(const ExperimentReport& r) {
  json norm = json::array();
  for (const auto& z : r.normalization)
    norm.push_back({{"n", z.n}, {"uw_loss", number(z.uw_loss)}, {"uw_ess", number(z.uw_ess)}});
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({
        {"method", row.method},
        {"family", row.family},
        {"k", row.k},
        {"n", row.n},
        {"replicates", row.replicates},
        {"failures", row.failures},
        {"mean_loss", number(row.mean_loss)},
        {"loss_std", number(row.loss_std)},
        {"mean_ess", number(row.mean_ess)},
        {"mean_auc", row.mean_auc ? number(*row.mean_auc) : json(nullptr)},
        {"normalized_loss", number(row.normalized_loss)},
        {"normalized_loss_std", number(row.normalized_loss_std)},
        {"normalized_ess", number(row.normalized_ess)},
        {"small_sample", row.small_sample},
    });
  }
  return {{"task", r.task},
          {"source", r.source},
          {"replicates", r.replicates},
          {"seed", r.seed},
          {"normalization", norm},
          {"rows", rows}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.task = j.at("task").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.replicates = j.at("replicates").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& z : j.at("normalization"))
      r.normalization.push_back({z.at("n").get<Index>(), number_from(z.at("uw_loss")),
                                 number_from(z.at("uw_ess"))});
    for (const auto& o : j.at("rows")) {
      ReportRow row;
      row.method = o.at("method").get<std::string>();
      row.family = o.at("family").get<std::string>();
      row.k = o.at("k").get<Index>();
      row.n = o.at("n").get<Index>();
      row.replicates = o.at("replicates").get<int>();
      row.failures = o.at("failures").get<int>();
      row.mean_loss = number_from(o.at("mean_loss"));
      row.loss_std = number_from(o.at("loss_std"));
      row.mean_ess = number_from(o.at("mean_ess"));
      if (!o.at("mean_auc").is_null()) row.mean_auc = o.at("mean_auc").get<double>();
      row.normalized_loss = number_from(o.at("normalized_loss"));
      row.normalized_loss_std = number_from(o.at("normalized_loss_std"));
      row.normalized_ess = number_from(o.at("normalized_ess"));
      row.small_sample = o.at("small_sample").get<bool>();
      r.rows.push_back(row);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "method,family,k,n,replicates,failures,mean_loss,loss_std,mean_ess,mean_auc,"
         "normalized_loss,normalized_loss_std,normalized_ess,small_sample\n";
  for (const auto& row : r.rows) {
    out << row.method << ',' << row.family << ',' << row.k << ',' << row.n << ','
        << row.replicates << ',' << row.failures << ',' << fmt(row.mean_loss) << ','
        << fmt(row.loss_std) << ',' << fmt(row.mean_ess) << ','
        << (row.mean_auc ? fmt(*row.mean_auc) : "") << ',' << fmt(row.normalized_loss) << ','
        << fmt(row.normalized_loss_std) << ',' << fmt(row.normalized_ess) << ','
        << (row.small_sample ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string records_csv(const std::vector<Record>& records) {
  std::ostringstream out;
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << r.method << ',' << r.n << ',' << r.replicate << ',' << r.seed << ',';
    if (r.ok()) out << fmt(r.loss) << ',' << fmt(r.ess);
    else out << ',';
    out << ',' << (r.auc ? fmt(*r.auc) : "") << ',' << (r.lambda ? fmt(*r.lambda) : "") << ','
        << r.iterations << ',';
    if (r.projection.size() > 0) {
      // rows x cols, then the entries column by column
      out << r.projection.rows() << 'x' << r.projection.cols() << ':';
      for (Index i = 0; i < r.projection.size(); ++i)
        out << (i ? " " : "") << csv::format_double(r.projection.data()[i]);
    }
    out << ',' << sanitize(r.error) << '\n';
  }
  return out.str();
}

std::vector<Record> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader)
    throw InputError("raw.csv:1: unexpected header");
  std::vector<Record> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11)
      throw InputError("raw.csv:" + std::to_string(line_no) + ": expected 11 fields, got " +
                       std::to_string(f.size()));
    Record r;
    try {
      r.method = f[0];
      r.n = std::stoll(f[1]);
      r.replicate = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.iterations = std::stoi(f[8]);
    } catch (const std::exception&) {
      throw InputError("raw.csv:" + std::to_string(line_no) + ": bad integer field");
    }
    r.error = f[10];
    if (r.ok()) {
      r.loss = parse_double(f[4], line_no);
      r.ess = parse_double(f[5], line_no);
    }
    if (!f[6].empty()) r.auc = parse_double(f[6], line_no);
    if (!f[7].empty()) r.lambda = parse_double(f[7], line_no);
    if (!f[9].empty()) {
      const auto colon = f[9].find(':');
      const auto x = f[9].find('x');
      if (colon == std::string::npos || x == std::string::npos || x > colon)
        throw InputError("raw.csv:" + std::to_string(line_no) + ": bad projection field");
      const Index rows = std::stoll(f[9].substr(0, x));
      const Index cols = std::stoll(f[9].substr(x + 1, colon - x - 1));
      const auto vals = split(f[9].substr(colon + 1), ' ');
      if (static_cast<Index>(vals.size()) != rows * cols)
        throw InputError("raw.csv:" + std::to_string(line_no) + ": projection size mismatch");
      r.projection.resize(rows, cols);
      for (Index i = 0; i < rows * cols; ++i)
        r.projection.data()[i] = parse_double(vals[static_cast<std::size_t>(i)], line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Three panels per sample size (loss, ESS, loss spread, all relative to UW)
// against the target dimension K. Dimensioned methods are drawn as lines over
// K, the others as horizontal references.
std::string report_svg(const ExperimentReport& r) {
  std::vector<Index> ns;
  for (const auto& row : r.rows)
    if (std::find(ns.begin(), ns.end(), row.n) == ns.end()) ns.push_back(row.n);
  Index k_max = 1;
  for (const auto& row : r.rows) k_max = std::max(k_max, row.k);

  constexpr double pw = 300, ph = 220, ml = 55, mt = 40, gap = 30, legend = 90;
  const double width = ml + 3 * (pw + gap) + legend;
  const double height = static_cast<double>(ns.size()) * (ph + mt + gap) + 20;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    const Index n = ns[ni];
    const double oy = static_cast<double>(ni) * (ph + mt + gap) + mt;
    bool small = false;
    for (const auto& row : r.rows) small = small || (row.n == n && row.small_sample);
    s << "<text x=\"" << ml << "\" y=\"" << oy - 22 << "\" font-size=\"13\">"
      << r.source << (n ? ", N = " + std::to_string(n) : std::string()) << ", "
      << r.replicates << " replicate" << (r.replicates == 1 ? "" : "s")
      << (small ? " (too few replicates for spread estimates)" : "") << "</text>\n";

    for (std::size_t p = 0; p < 3; ++p) {
      const Panel& panel = kPanels[p];
      const double ox = ml + static_cast<double>(p) * (pw + gap);
      double lo = 1.0, hi = 1.0;
      for (const auto& row : r.rows) {
        const double v = row.*panel.value;
        if (row.n != n || !std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (p != 0) lo = std::min(lo, 0.0);
      const double pad = 0.08 * std::max(hi - lo, 1e-3);
      lo -= pad;
      hi += pad;
      auto px = [&](double k) {
        return k_max == 1 ? ox + pw / 2
                          : ox + 20 + (k - 1) / static_cast<double>(k_max - 1) * (pw - 40);
      };
      auto py = [&](double v) { return oy + ph - (v - lo) / (hi - lo) * ph; };

      s << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
      s << "<text x=\"" << ox + pw / 2 << "\" y=\"" << oy - 6 << "\" text-anchor=\"middle\">"
        << panel.title << "</text>\n";
      for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        s << "<text x=\"" << ox - 4 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
          << num(v) << "</text>\n";
      }
      for (Index k = 1; k <= k_max; ++k)
        s << "<text x=\"" << px(static_cast<double>(k)) << "\" y=\"" << oy + ph + 14
          << "\" text-anchor=\"middle\">" << k << "</text>\n";
      s << "<text x=\"" << ox + pw / 2 << "\" y=\"" << oy + ph + 28
        << "\" text-anchor=\"middle\">K</text>\n";

      std::map<std::string, std::vector<std::pair<double, double>>> series;
      for (const auto& row : r.rows) {
        const double v = row.*panel.value;
        if (row.n != n || !std::isfinite(v)) continue;
        if (row.k == 0) {
          s << "<line x1=\"" << ox << "\" x2=\"" << ox + pw << "\" y1=\"" << py(v) << "\" y2=\""
            << py(v) << "\" stroke=\"" << colour(row.family)
            << "\" stroke-dasharray=\"5,4\"/>\n";
        } else {
          series[row.family].emplace_back(static_cast<double>(row.k), v);
        }
      }
      for (auto& [family, pts] : series) {
        std::sort(pts.begin(), pts.end());
        s << "<polyline fill=\"none\" stroke=\"" << colour(family) << "\" stroke-width=\"2\" points=\"";
        for (const auto& [k, v] : pts) s << px(k) << ',' << py(v) << ' ';
        s << "\"/>\n";
        for (const auto& [k, v] : pts)
          s << "<circle cx=\"" << px(k) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\""
            << colour(family) << "\"/>\n";
      }
    }

    double ly = oy + 10;
    std::vector<std::string> families;
    for (const auto& row : r.rows)
      if (std::find(families.begin(), families.end(), row.family) == families.end())
        families.push_back(row.family);
    const double lx = ml + 3 * (pw + gap);
    for (const auto& f : families) {
      s << "<line x1=\"" << lx << "\" x2=\"" << lx + 20 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << colour(f) << "\" stroke-width=\"2\"/>\n";
      s << "<text x=\"" << lx + 25 << "\" y=\"" << ly + 4 << "\">" << f << "</text>\n";
      ly += 16;
    }
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const ExperimentReport& report, Format format,
                 const std::filesystem::path& file) {
  std::string text;
  switch (format) {
    case Format::kCsv: text = report_csv(report); break;
    case Format::kJson: text = report_to_json(report).dump(2) + "\n"; break;
    case Format::kSvg: text = report_svg(report); break;
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << text;
  if (!out) throw InputError("write failed: " + file.string());
}

}  // namespace edr::experiment
