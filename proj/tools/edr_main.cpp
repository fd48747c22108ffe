// edr: command-line front end for simulation, shift induction, experiments
// and the hypergradient audit.
//
// Exit codes: 0 success, 1 runtime failure (experiment aborted, gradient
// audit above tolerance, numerical breakdown), 2 usage or malformed input.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "edr/csv.hpp"
#include "edr/experiment.hpp"
#include "edr/shift_induction.hpp"
#include "edr/subspace_search.hpp"
#include "edr/synthetic.hpp"

namespace {

using namespace edr;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

int cmd_simulate(const std::string& generator, Index n, std::uint64_t seed,
                 const std::filesystem::path& out) {
  if (generator != "example1" && generator != "example2")
    throw InputError("unknown generator '" + generator + "' (example1 or example2)");
  require(n >= 3, "--n must be at least 3");
  const TrainTestPair pair = generator == "example1" ? synthetic::gen_example1(n, seed)
                                                     : synthetic::gen_example2(n, seed);
  csv::write_pair(out, pair);
  write_json(out / "manifest.json", {{"mode", "simulate"},
                                     {"generator", generator},
                                     {"n", n},
                                     {"seed", seed},
                                     {"n_train", pair.x_train.rows()},
                                     {"n_test", pair.x_test.rows()},
                                     {"n_holdout", pair.x_holdout.rows()}});
  std::cout << "wrote " << out.string() << " (" << pair.x_train.rows() << " train, "
            << pair.x_test.rows() << " test, " << pair.x_holdout.rows() << " holdout)\n";
  return 0;
}

int cmd_induce(const std::filesystem::path& table_path, const shift::ShiftSpec& spec,
               const std::filesystem::path& out) {
  spec.validate();
  const csv::Table t = csv::read(table_path);
  if (!t.y) throw InputError(table_path.string() + ": missing y column");
  const auto choice = shift::pick_predictive_vector(t.x, *t.y, spec);
  const auto induced = shift::induce_shift(t.x, *t.y, choice.vector, spec);
  csv::write_pair(out, induced.data);
  nlohmann::json m = shift::manifest(induced, spec);
  m["source"] = table_path.generic_string();
  m["candidate_index"] = choice.index;
  write_json(out / "manifest.json", m);
  std::cout << "wrote " << out.string() << " (" << induced.data.x_train.rows() << " train, "
            << induced.data.x_test.rows() << " test, " << induced.data.x_holdout.rows()
            << " holdout)\n";
  return 0;
}

int cmd_subgroup(const std::filesystem::path& table_path, const shift::SubgroupSpec& spec,
                 const std::filesystem::path& out) {
  const csv::Table t = csv::read(table_path);
  if (!t.y) throw InputError(table_path.string() + ": missing y column");
  if (!t.group) throw InputError(table_path.string() + ": missing group column");
  const TrainTestPair pair = shift::subgroup_split(t.x, *t.y, *t.group, spec);
  csv::write_pair(out, pair);
  nlohmann::json m = shift::manifest(pair, spec);
  m["source"] = table_path.generic_string();
  write_json(out / "manifest.json", m);
  std::cout << "wrote " << out.string() << " (" << pair.x_train.rows() << " train, "
            << pair.x_test.rows() << " test, " << pair.x_holdout.rows() << " holdout)\n";
  return 0;
}

void print_report(const experiment::ExperimentReport& r) {
  std::printf("%-8s %6s %10s %10s %10s %10s %10s\n", "method", "N", "loss", "std", "ESS",
              "loss/UW", "ESS/UW");
  for (const auto& row : r.rows)
    std::printf("%-8s %6lld %10.4f %10.4f %10.1f %10.3f %10.3f%s\n", row.method.c_str(),
                static_cast<long long>(row.n), row.mean_loss, row.loss_std, row.mean_ess,
                row.normalized_loss, row.normalized_ess, row.small_sample ? "  (small sample)" : "");
}

int cmd_run(const std::filesystem::path& config_path, const std::string& out_dir, int threads,
            int replicates) {
  experiment::ExperimentConfig config = experiment::load_config(config_path);
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (threads >= 0) config.threads = threads;
  if (replicates > 0) config.replicates = replicates;
  config.validate();
  const auto report = experiment::run_experiment(config);
  print_report(report);
  std::cout << "outputs in " << config.output_dir.string() << '\n';
  return 0;
}

int cmd_report(const std::filesystem::path& in, const std::string& format,
               const std::filesystem::path& out) {
  std::ifstream file(in);
  if (!file) throw InputError("cannot open " + in.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(file);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(in.string() + ": " + e.what());
  }
  const auto report = experiment::report_from_json(j);
  require(!report.rows.empty(), "report has no rows");
  const auto fmt = format == "csv"    ? experiment::Format::kCsv
                   : format == "json" ? experiment::Format::kJson
                                      : experiment::Format::kSvg;
  experiment::emit_report(report, fmt, out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int instances, double tolerance) {
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const auto inst = search::make_gradcheck_instance(s);
    const auto r = search::gradcheck(inst.a, inst.data, inst.hyper, inst.settings);
    std::printf("seed %llu  D=%lld K=%lld N=%lld  max relative error %.3e\n",
                static_cast<unsigned long long>(s), static_cast<long long>(inst.a.rows()),
                static_cast<long long>(inst.a.cols()),
                static_cast<long long>(inst.data.x_train.rows()), r.max_relative_error);
    worst = std::max(worst, r.max_relative_error);
  }
  std::printf("max relative gradient error %.3e (tolerance %.1e): %s\n", worst, tolerance,
              worst <= tolerance ? "ok" : "FAILED");
  return worst <= tolerance ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-dimensional importance weighting under covariate shift"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a simulated train/test pair as CSV");
  std::string generator;
  Index sim_n = 150;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("generator", generator, "example1 or example2")->required();
  sim->add_option("--n", sim_n, "Training (and test) sample size")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->required();

  // induce
  auto* ind = app.add_subcommand("induce", "Directional biased subsampling of a labeled table");
  std::string ind_table, ind_out;
  shift::ShiftSpec shift_spec;
  bool no_standardize = false;
  ind->add_option("table", ind_table, "CSV with x0..x{D-1},y")->required();
  ind->add_option("--out", ind_out, "Output directory")->required();
  ind->add_option("--alpha", shift_spec.alpha, "Acceptance mean position in [0, 1]")->capture_default_str();
  ind->add_option("--c", shift_spec.c, "Acceptance variance in units of sigma^2")->capture_default_str();
  ind->add_option("--train-fraction", shift_spec.train_fraction)->capture_default_str();
  ind->add_option("--holdout-fraction", shift_spec.holdout_fraction)->capture_default_str();
  ind->add_option("--candidates", shift_spec.n_candidate_vectors, "Random directions scored")->capture_default_str();
  ind->add_option("--bandwidth-scale", shift_spec.bandwidth_scale)->capture_default_str();
  ind->add_option("--seed", shift_spec.seed)->capture_default_str();
  ind->add_flag("--no-standardize", no_standardize, "Search directions in raw coordinates");

  // subgroup
  auto* sub = app.add_subcommand("subgroup", "Train on all rows, test on the group == 1 rows");
  std::string sub_table, sub_out;
  shift::SubgroupSpec sub_spec;
  sub->add_option("table", sub_table, "CSV with x0..x{D-1},y,group")->required();
  sub->add_option("--out", sub_out, "Output directory")->required();
  sub->add_option("--holdout-fraction", sub_spec.holdout_fraction)->capture_default_str();
  sub->add_option("--seed", sub_spec.seed)->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run a replicated experiment from a JSON config");
  std::string config_path, run_out;
  int threads = -1, replicates = 0;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Override output_dir");
  run->add_option("--threads", threads, "Override threads (0: all cores)");
  run->add_option("--replicates", replicates, "Override replicates");

  // report
  auto* rep = app.add_subcommand("report", "Re-emit a report.json as csv, json or svg");
  std::string rep_in, rep_out, rep_format = "svg";
  rep->add_option("report", rep_in, "report.json")->required();
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"csv", "json", "svg"}))->capture_default_str();
  rep->add_option("--out", rep_out, "Output file")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare hypergradients with central differences");
  std::uint64_t gc_seed = 0;
  int gc_instances = 1;
  double gc_tol = 1e-3;
  gc->add_option("--seed", gc_seed, "Seed of the first instance")->capture_default_str();
  gc->add_option("--instances", gc_instances, "Consecutive seeds to check")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gc->add_option("--tolerance", gc_tol)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*sim) return cmd_simulate(generator, sim_n, sim_seed, sim_out);
    if (*ind) {
      shift_spec.standardize = !no_standardize;
      return cmd_induce(ind_table, shift_spec, ind_out);
    }
    if (*sub) return cmd_subgroup(sub_table, sub_spec, sub_out);
    if (*run) return cmd_run(config_path, run_out, threads, replicates);
    if (*rep) return cmd_report(rep_in, rep_format, rep_out);
    if (*gc) return cmd_gradcheck(gc_seed, gc_instances, gc_tol);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const experiment::ExperimentError& e) {
    std::cerr << "experiment aborted: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
