#include "edr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "edr/csv.hpp"
#include "edr/synthetic.hpp"

namespace edr::experiment {

namespace {

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kSubsampleStream = 0x5ab;
constexpr std::uint64_t kMethodStream = 0x3e7;
constexpr std::uint64_t kVectorStream = 0x7ec;

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t label_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_string(model::Task t) {
  return t == model::Task::kRegression ? "regression" : "classification";
}

model::Task task_from(const std::string& s) {
  if (s == "regression") return model::Task::kRegression;
  if (s == "classification") return model::Task::kClassification;
  throw InputError("task must be regression or classification, got '" + s + "'");
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InputError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string source_label(const DataSource& d) {
  switch (d.kind) {
    case DataSource::Kind::kGenerator: return d.generator;
    case DataSource::Kind::kCsvPair: return "csv:" + d.path.generic_string();
    case DataSource::Kind::kInduce: return "induce:" + d.path.generic_string();
    case DataSource::Kind::kSubgroup: return "subgroup:" + d.path.generic_string();
  }
  return "";
}

// Whatever the replicates share: a loaded table and, for induced shifts, the
// predictive vector.
struct Prepared {
  std::optional<csv::Table> table;
  std::optional<TrainTestPair> pair;
  Vector vector;
};

Prepared prepare(const ExperimentConfig& config) {
  Prepared p;
  const auto& src = config.data;
  switch (src.kind) {
    case DataSource::Kind::kGenerator:
      break;
    case DataSource::Kind::kCsvPair:
      p.pair = csv::read_pair(src.path);
      break;
    case DataSource::Kind::kInduce:
    case DataSource::Kind::kSubgroup: {
      csv::Table t = csv::read(src.path);
      if (!t.y) throw InputError(src.path.string() + ": missing y column");
      if (src.kind == DataSource::Kind::kSubgroup && !t.group)
        throw InputError(src.path.string() + ": missing group column");
      // Standardize once so kernels and ridge penalties see comparable scales.
      if (src.shift.standardize) t.x = shift::Standardizer::fit(t.x).apply(t.x);
      if (src.kind == DataSource::Kind::kInduce) {
        shift::ShiftSpec spec = src.shift;
        spec.standardize = false;
        spec.seed = derive_seed(config.seed, kVectorStream);
        p.vector = shift::pick_predictive_vector(t.x, *t.y, spec).vector;
      }
      p.table = std::move(t);
      break;
    }
  }
  return p;
}

csv::Table subsample(const csv::Table& t, Index n, std::uint64_t seed) {
  if (n == 0) return t;
  require(n <= t.x.rows(), "n_values entry " + std::to_string(n) + " exceeds the table's " +
                               std::to_string(t.x.rows()) + " rows");
  std::vector<Index> rows(static_cast<std::size_t>(t.x.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(n));
  std::sort(rows.begin(), rows.end());
  csv::Table out;
  out.x.resize(n, t.x.cols());
  Vector y(n), g(n);
  for (Index i = 0; i < n; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    out.x.row(i) = t.x.row(r);
    y(i) = (*t.y)(r);
    if (t.group) g(i) = (*t.group)(r);
  }
  out.y = y;
  if (t.group) out.group = g;
  return out;
}

TrainTestPair make_data(const ExperimentConfig& config, const Prepared& p, Index n,
                        int replicate) {
  const std::uint64_t seed = config.replicate_seed(replicate);
  const std::uint64_t data_seed = derive_seed(seed, kDataStream, static_cast<std::uint64_t>(n));
  const auto& src = config.data;
  switch (src.kind) {
    case DataSource::Kind::kGenerator:
      return src.generator == "example1" ? synthetic::gen_example1(n, data_seed)
                                         : synthetic::gen_example2(n, data_seed);
    case DataSource::Kind::kCsvPair:
      return *p.pair;
    case DataSource::Kind::kInduce: {
      const csv::Table t = subsample(*p.table, n, derive_seed(seed, kSubsampleStream));
      shift::ShiftSpec spec = src.shift;
      spec.standardize = false;
      spec.seed = data_seed;
      return shift::induce_shift(t.x, *t.y, p.vector, spec).data;
    }
    case DataSource::Kind::kSubgroup: {
      const csv::Table t = subsample(*p.table, n, derive_seed(seed, kSubsampleStream));
      shift::SubgroupSpec spec = src.subgroup;
      spec.seed = data_seed;
      return shift::subgroup_split(t.x, *t.y, *t.group, spec);
    }
  }
  throw InputError("unknown data source");
}

std::vector<Index> effective_n_values(const ExperimentConfig& config) {
  if (config.n_values.empty()) return {0};
  return config.n_values;
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << text;
  if (!out) throw InputError("write failed: " + file.string());
}

}  // namespace

// --- methods ------------------------------------------------------------------

MethodSpec MethodSpec::parse(const std::string& text) {
  static const std::regex re(R"(^(JP|UW|IW|RP|SIR)(?:\((\d+)\))?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re))
    throw InputError("unknown method '" + text + "' (expected JP(K), UW, IW, RP(K) or SIR(K))");
  MethodSpec s;
  const std::string fam = m[1];
  if (fam == "JP") s.kind = MethodKind::kJP;
  else if (fam == "UW") s.kind = MethodKind::kUW;
  else if (fam == "IW") s.kind = MethodKind::kIW;
  else if (fam == "RP") s.kind = MethodKind::kRP;
  else s.kind = MethodKind::kSIR;
  const bool needs_k = s.kind == MethodKind::kJP || s.kind == MethodKind::kRP ||
                       s.kind == MethodKind::kSIR;
  if (needs_k != m[2].matched)
    throw InputError("method '" + text + "': " + fam +
                     (needs_k ? " needs a dimension, e.g. " + fam + "(1)" : " takes no dimension"));
  if (needs_k) {
    s.k = std::stoll(m[2]);
    if (*s.k < 1) throw InputError("method '" + text + "': dimension must be at least 1");
  }
  return s;
}

std::string MethodSpec::family() const {
  switch (kind) {
    case MethodKind::kJP: return "JP";
    case MethodKind::kUW: return "UW";
    case MethodKind::kIW: return "IW";
    case MethodKind::kRP: return "RP";
    case MethodKind::kSIR: return "SIR";
  }
  return "";
}

std::string MethodSpec::label() const {
  return k ? family() + "(" + std::to_string(*k) + ")" : family();
}

// --- config -------------------------------------------------------------------

void ExperimentConfig::validate() {
  require(replicates >= 1, "replicates must be at least 1");
  require(!methods.empty(), "methods must not be empty");
  require(threads >= 0, "threads must be non-negative");
  require(max_failure_rate >= 0.0 && max_failure_rate <= 1.0, "max_failure_rate must be in [0, 1]");
  for (const Index n : n_values) require(n >= 3, "n_values entries must be at least 3");
  if (data.kind == DataSource::Kind::kGenerator) {
    require(data.generator == "example1" || data.generator == "example2",
            "generator must be example1 or example2, got '" + data.generator + "'");
    require(!n_values.empty(), "n_values is required for generated data");
    require(task == model::Task::kRegression, "the generators produce regression data");
  } else {
    require(!data.path.empty(), "data path is required");
  }
  if (data.kind == DataSource::Kind::kCsvPair)
    require(n_values.empty(), "n_values does not apply to a fixed train/test pair");
  data.shift.validate();
  require(data.subgroup.holdout_fraction > 0.0 && data.subgroup.holdout_fraction < 1.0,
          "subgroup holdout_fraction must be in (0, 1)");
  require(baseline.folds >= 2, "baseline folds must be at least 2");
  require(baseline.n_slices >= 2, "baseline n_slices must be at least 2");

  std::vector<std::string> seen;
  for (const auto& m : methods) {
    const auto l = m.label();
    require(std::find(seen.begin(), seen.end(), l) == seen.end(), "duplicate method " + l);
    seen.push_back(l);
  }
  const MethodSpec uw{MethodKind::kUW, std::nullopt};
  if (std::find(methods.begin(), methods.end(), uw) == methods.end()) methods.push_back(uw);
}

std::uint64_t ExperimentConfig::replicate_seed(int replicate) const {
  return seed + static_cast<std::uint64_t>(replicate);
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, {"data", "task", "methods", "replicates", "n_values", "seed", "output_dir",
                 "threads", "search", "baseline", "max_failure_rate"},
             "config");
  ExperimentConfig c;
  try {
    const auto& d = j.at("data");
    check_keys(d, {"generator", "csv_dir", "induce", "subgroup"}, "data");
    if (d.size() != 1) throw InputError("data must have exactly one of generator, csv_dir, induce, subgroup");
    if (d.contains("generator")) {
      c.data.kind = DataSource::Kind::kGenerator;
      c.data.generator = d.at("generator").get<std::string>();
    } else if (d.contains("csv_dir")) {
      c.data.kind = DataSource::Kind::kCsvPair;
      c.data.path = d.at("csv_dir").get<std::string>();
    } else if (d.contains("induce")) {
      const auto& s = d.at("induce");
      check_keys(s, {"table", "n_candidate_vectors", "alpha", "c", "train_fraction",
                     "holdout_fraction", "standardize", "bandwidth_scale"},
                 "data.induce");
      c.data.kind = DataSource::Kind::kInduce;
      c.data.path = s.at("table").get<std::string>();
      read_if(s, "n_candidate_vectors", c.data.shift.n_candidate_vectors);
      read_if(s, "alpha", c.data.shift.alpha);
      read_if(s, "c", c.data.shift.c);
      read_if(s, "train_fraction", c.data.shift.train_fraction);
      read_if(s, "holdout_fraction", c.data.shift.holdout_fraction);
      read_if(s, "standardize", c.data.shift.standardize);
      read_if(s, "bandwidth_scale", c.data.shift.bandwidth_scale);
    } else {
      const auto& s = d.at("subgroup");
      check_keys(s, {"table", "holdout_fraction", "standardize"}, "data.subgroup");
      c.data.kind = DataSource::Kind::kSubgroup;
      c.data.path = s.at("table").get<std::string>();
      read_if(s, "holdout_fraction", c.data.subgroup.holdout_fraction);
      read_if(s, "standardize", c.data.shift.standardize);
    }

    if (j.contains("task")) c.task = task_from(j.at("task").get<std::string>());
    for (const auto& m : j.at("methods")) c.methods.push_back(MethodSpec::parse(m.get<std::string>()));
    read_if(j, "replicates", c.replicates);
    if (j.contains("n_values"))
      for (const auto& n : j.at("n_values")) c.n_values.push_back(n.get<Index>());
    read_if(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    read_if(j, "threads", c.threads);
    read_if(j, "max_failure_rate", c.max_failure_rate);

    if (j.contains("search")) {
      const auto& s = j.at("search");
      check_keys(s, {"lambda_grid", "restarts", "max_iters", "inline_cv_period", "cv_folds",
                     "max_centers", "subspace_tolerance", "gradient_tolerance", "penalty",
                     "sigma_factors", "gamma_grid", "c_grid", "normalize_weights",
                     "downstream_refit"},
                 "search");
      auto& sc = c.search;
      read_if(s, "lambda_grid", sc.lambda_grid);
      read_if(s, "restarts", sc.restarts);
      read_if(s, "max_iters", sc.max_iters);
      read_if(s, "inline_cv_period", sc.inline_cv_period);
      read_if(s, "cv_folds", sc.cv_folds);
      read_if(s, "max_centers", sc.max_centers);
      read_if(s, "subspace_tolerance", sc.subspace_tolerance);
      read_if(s, "gradient_tolerance", sc.gradient_tolerance);
      read_if(s, "sigma_factors", sc.sigma_factors);
      read_if(s, "gamma_grid", sc.gamma_grid);
      read_if(s, "c_grid", sc.c_grid);
      read_if(s, "normalize_weights", sc.normalize_weights);
      read_if(s, "downstream_refit", sc.downstream_refit);
      if (s.contains("penalty")) {
        const auto p = s.at("penalty").get<std::string>();
        if (p == "quadratic") sc.penalty = ratio::Penalty::kQuadratic;
        else if (p == "linear") sc.penalty = ratio::Penalty::kLinear;
        else throw InputError("search.penalty must be quadratic or linear");
      }
    }
    c.baseline.penalty = c.search.penalty;
    c.baseline.max_centers = c.search.max_centers;
    c.baseline.c_grid = c.search.c_grid;
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      check_keys(b, {"folds", "n_slices"}, "baseline");
      read_if(b, "folds", c.baseline.folds);
      read_if(b, "n_slices", c.baseline.n_slices);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json data;
  switch (c.data.kind) {
    case DataSource::Kind::kGenerator: data["generator"] = c.data.generator; break;
    case DataSource::Kind::kCsvPair: data["csv_dir"] = c.data.path.generic_string(); break;
    case DataSource::Kind::kInduce: {
      nlohmann::json s = shift::to_json(c.data.shift);
      s.erase("seed");
      s.erase("bandwidth_rule");
      s["table"] = c.data.path.generic_string();
      data["induce"] = s;
      break;
    }
    case DataSource::Kind::kSubgroup:
      data["subgroup"] = {{"table", c.data.path.generic_string()},
                          {"holdout_fraction", c.data.subgroup.holdout_fraction},
                          {"standardize", c.data.shift.standardize}};
      break;
  }
  std::vector<std::string> methods;
  for (const auto& m : c.methods) methods.push_back(m.label());
  const auto& s = c.search;
  return {
      {"data", data},
      {"task", to_string(c.task)},
      {"methods", methods},
      {"replicates", c.replicates},
      {"n_values", c.n_values},
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"threads", c.threads},
      {"max_failure_rate", c.max_failure_rate},
      {"search",
       {{"lambda_grid", s.lambda_grid},
        {"restarts", s.restarts},
        {"max_iters", s.max_iters},
        {"inline_cv_period", s.inline_cv_period},
        {"cv_folds", s.cv_folds},
        {"max_centers", s.max_centers},
        {"subspace_tolerance", s.subspace_tolerance},
        {"gradient_tolerance", s.gradient_tolerance},
        {"penalty", s.penalty == ratio::Penalty::kQuadratic ? "quadratic" : "linear"},
        {"sigma_factors", s.sigma_factors},
        {"gamma_grid", s.gamma_grid},
        {"c_grid", s.c_grid},
        {"normalize_weights", s.normalize_weights},
        {"downstream_refit", s.downstream_refit}}},
      {"baseline", {{"folds", c.baseline.folds}, {"n_slices", c.baseline.n_slices}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  // Relative data paths are relative to the config file.
  if (!c.data.path.empty() && c.data.path.is_relative())
    c.data.path = path.parent_path() / c.data.path;
  return c;
}

// --- running ------------------------------------------------------------------

TrainTestPair replicate_data(const ExperimentConfig& config, Index n, int replicate) {
  return make_data(config, prepare(config), n, replicate);
}

Record run_method(const MethodSpec& method, const TrainTestPair& data,
                  const ExperimentConfig& config, std::uint64_t seed) {
  Record rec;
  rec.method = method.label();
  rec.seed = seed;
  const model::LossSpec loss = model::LossSpec::for_task(config.task);
  const bool classification = config.task == model::Task::kClassification;
  try {
    if (method.kind == MethodKind::kJP) {
      search::SearchConfig sc = config.search;
      sc.k = *method.k;
      sc.loss = loss;
      sc.seed = seed;
      const search::SearchResult r = search::search(data, sc);
      const Matrix& a = r.projection.matrix();
      const Matrix u_hold = data.x_holdout * a;
      const model::LinearModel& fit = r.downstream ? r.downstream->model : r.best.model;
      rec.loss = model::eval_loss(fit, u_hold, data.y_holdout, loss);
      rec.ess = r.downstream ? r.downstream->ratio.weights.ess : r.best.weights.ess;
      if (classification) rec.auc = model::auc(fit.scores(u_hold), data.y_holdout);
      rec.lambda = r.per_lambda[r.lambda_index].lambda;
      rec.iterations = r.iterations;
      rec.projection = a;
    } else {
      baselines::BaselineSpec spec;
      spec.kind = method.kind == MethodKind::kUW   ? baselines::Kind::kUW
                  : method.kind == MethodKind::kIW ? baselines::Kind::kIW
                  : method.kind == MethodKind::kRP ? baselines::Kind::kRP
                                                   : baselines::Kind::kSIR;
      spec.k = method.k;
      spec.seed = seed;
      baselines::BaselineOptions opt = config.baseline;
      opt.loss = loss;
      const baselines::FitResult fit = baselines::run_baseline(spec, data, opt);
      rec.loss = baselines::holdout_loss(fit, data, loss);
      rec.ess = fit.ess;
      if (classification) rec.auc = model::auc(fit.scores(data.x_holdout), data.y_holdout);
      if (method.k) rec.projection = fit.projection;
    }
    if (!std::isfinite(rec.loss)) throw NumericalError("non-finite holdout loss");
  } catch (const std::exception& e) {
    rec.error = e.what();
    if (rec.error.empty()) rec.error = "unknown error";
  }
  return rec;
}

ExperimentResult run_records(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  config.validate();
  const Prepared prepared = prepare(config);
  const auto ns = effective_n_values(config);
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_tasks = ns.size() * static_cast<std::size_t>(config.replicates);

  std::vector<Record> records(n_tasks * n_methods);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const Index n = ns[t / static_cast<std::size_t>(config.replicates)];
      const int r = static_cast<int>(t % static_cast<std::size_t>(config.replicates));
      const std::uint64_t rseed = config.replicate_seed(r);
      std::optional<TrainTestPair> data;
      std::string data_error;
      try {
        data = make_data(config, prepared, n, r);
      } catch (const std::exception& e) {
        data_error = std::string("data: ") + e.what();
      }
      for (std::size_t m = 0; m < n_methods; ++m) {
        const auto& method = config.methods[m];
        Record rec;
        const std::uint64_t mseed = derive_seed(rseed, kMethodStream, label_hash(method.label()));
        if (data) {
          rec = run_method(method, *data, config, mseed);
        } else {
          rec.method = method.label();
          rec.seed = mseed;
          rec.error = data_error;
        }
        rec.n = n;
        rec.replicate = r;
        if (!rec.ok()) {
          std::lock_guard lock(log_mutex);
          spdlog::warn("{} n={} replicate={}: {}", rec.method, n, r, rec.error);
        }
        records[t * n_methods + m] = std::move(rec);
      }
      spdlog::debug("replicate {} n={} done", r, n);
    }
  };

  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_tasks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  ExperimentResult out;
  out.records = std::move(records);
  out.report = aggregate(out.records, config);
  return out;
}

void check_failures(const std::vector<Record>& records, const ExperimentConfig& config) {
  std::map<std::pair<std::string, Index>, int> failures;
  for (const auto& r : records)
    if (!r.ok()) ++failures[{r.method, r.n}];
  const double limit = config.max_failure_rate * config.replicates;
  for (const auto& [key, count] : failures)
    if (count > limit)
      throw ExperimentError(key.first + " failed on " + std::to_string(count) + " of " +
                            std::to_string(config.replicates) + " replicates" +
                            (key.second ? " at N=" + std::to_string(key.second) : ""));
}

std::string failure_log(const std::vector<Record>& records) {
  std::ostringstream out;
  for (const auto& r : records)
    if (!r.ok())
      out << r.method << " n=" << r.n << " replicate=" << r.replicate << " seed=" << r.seed
          << ": " << r.error << '\n';
  return out.str();
}

ExperimentReport run_experiment(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  const auto dir = config.output_dir;

  ExperimentResult result = run_records(config);
  write_text(dir / "raw.csv", records_csv(result.records));
  try {
    check_failures(result.records, config);
  } catch (const ExperimentError&) {
    write_text(dir / "errors.log", failure_log(result.records));
    throw;
  }

  emit_report(result.report, Format::kJson, dir / "report.json");
  emit_report(result.report, Format::kCsv, dir / "report.csv");
  emit_report(result.report, Format::kSvg, dir / "figure.svg");

  nlohmann::json seeds = nlohmann::json::array();
  for (int r = 0; r < config.replicates; ++r) seeds.push_back(config.replicate_seed(r));
  const nlohmann::json manifest = {
      {"config", to_json(config)},
      {"replicate_seeds", seeds},
      {"records", result.records.size()},
      {"failures", std::count_if(result.records.begin(), result.records.end(),
                                 [](const Record& r) { return !r.ok(); })},
      {"outputs", {"raw.csv", "report.json", "report.csv", "figure.svg"}},
  };
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return result.report;
}

// --- aggregation ----------------------------------------------------------------

ExperimentReport aggregate(const std::vector<Record>& records, const ExperimentConfig& config) {
  ExperimentReport rep;
  rep.task = to_string(config.task);
  rep.source = source_label(config.data);
  rep.replicates = config.replicates;
  rep.seed = config.seed;
  const bool classification = config.task == model::Task::kClassification;

  for (const auto& m : config.methods) {
    for (const Index n : effective_n_values(config)) {
      std::vector<double> loss, ess, auc;
      int fails = 0;
      for (const auto& r : records) {
        if (r.method != m.label() || r.n != n) continue;
        if (!r.ok()) {
          ++fails;
          continue;
        }
        loss.push_back(r.loss);
        ess.push_back(r.ess);
        if (r.auc) auc.push_back(*r.auc);
      }
      ReportRow row;
      row.method = m.label();
      row.family = m.family();
      row.k = m.k.value_or(0);
      row.n = n;
      row.replicates = static_cast<int>(loss.size()) + fails;
      row.failures = fails;
      row.mean_loss = mean_of(loss);
      row.loss_std = sample_std(loss);
      row.mean_ess = mean_of(ess);
      if (classification && !auc.empty()) row.mean_auc = mean_of(auc);
      row.small_sample = loss.size() < 2;
      rep.rows.push_back(row);
    }
  }
  normalize(rep);
  return rep;
}

void normalize(ExperimentReport& report) {
  report.normalization.clear();
  for (const auto& row : report.rows) {
    if (row.family != "UW") continue;
    report.normalization.push_back({row.n, row.mean_loss, row.mean_ess});
  }
  std::sort(report.normalization.begin(), report.normalization.end(),
            [](const Normalization& a, const Normalization& b) { return a.n < b.n; });
  for (auto& row : report.rows) {
    const auto it = std::find_if(report.normalization.begin(), report.normalization.end(),
                                 [&](const Normalization& z) { return z.n == row.n; });
    if (it == report.normalization.end())
      throw InputError("normalize: no UW row for N=" + std::to_string(row.n));
    row.normalized_loss = row.mean_loss / it->uw_loss;
    row.normalized_loss_std = row.loss_std / it->uw_loss;
    row.normalized_ess = row.mean_ess / it->uw_ess;
  }
}

}  // namespace edr::experiment
