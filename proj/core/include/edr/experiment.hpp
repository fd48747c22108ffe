#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edr/baselines.hpp"
#include "edr/common.hpp"
#include "edr/data.hpp"
#include "edr/shift_induction.hpp"
#include "edr/subspace_search.hpp"

/// Replicated experiments: data source x methods x N, per-replicate records,
/// aggregation normalized to the unweighted baseline, and report emission.
namespace edr::experiment {

enum class MethodKind { kJP, kUW, kIW, kRP, kSIR };

struct MethodSpec {
  MethodKind kind = MethodKind::kUW;
  std::optional<Index> k;

  /// "JP(1)", "UW", "IW", "RP(2)", "SIR(1)". Throws InputError otherwise.
  static MethodSpec parse(const std::string& text);
  std::string label() const;
  std::string family() const;  // label without the dimension
  bool operator==(const MethodSpec&) const = default;
};

struct DataSource {
  enum class Kind { kGenerator, kCsvPair, kInduce, kSubgroup };
  Kind kind = Kind::kGenerator;
  std::string generator = "example1";  // kGenerator
  std::filesystem::path path;          // directory (kCsvPair) or table (kInduce, kSubgroup)
  shift::ShiftSpec shift;              // kInduce; its seed is replaced per replicate
  shift::SubgroupSpec subgroup;        // kSubgroup; likewise
};

struct ExperimentConfig {
  DataSource data;
  model::Task task = model::Task::kRegression;
  std::vector<MethodSpec> methods;
  int replicates = 50;
  // Sample sizes. For generators, N train and N test rows; for tables, an
  // N-row uniform subsample before splitting. Empty means the whole table.
  std::vector<Index> n_values;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  int threads = 0;  // 0: hardware concurrency
  search::SearchConfig search;
  baselines::BaselineOptions baseline;
  double max_failure_rate = 0.2;

  /// Adds UW when missing (it anchors the normalization) and checks ranges.
  void validate();
  std::uint64_t replicate_seed(int replicate) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One method on one replicate.
struct Record {
  std::string method;
  Index n = 0;  // 0 when the whole table was used
  int replicate = 0;
  std::uint64_t seed = 0;
  double loss = 0.0;
  double ess = 0.0;
  std::optional<double> auc;  // classification only
  std::optional<double> lambda;
  int iterations = 0;
  Matrix projection;  // D x K, empty for unprojected methods
  std::string error;  // nonempty on failure

  bool ok() const { return error.empty(); }
};

struct ReportRow {
  std::string method;
  std::string family;
  Index k = 0;  // 0 for unprojected methods
  Index n = 0;
  int replicates = 0;
  int failures = 0;
  double mean_loss = 0.0;
  double loss_std = 0.0;  // sample standard deviation; 0 for one replicate
  double mean_ess = 0.0;
  std::optional<double> mean_auc;
  double normalized_loss = 0.0;
  double normalized_loss_std = 0.0;
  double normalized_ess = 0.0;
  bool small_sample = false;  // fewer than two successful replicates

  bool operator==(const ReportRow&) const = default;
};

struct Normalization {
  Index n = 0;
  double uw_loss = 0.0;
  double uw_ess = 0.0;
  bool operator==(const Normalization&) const = default;
};

struct ExperimentReport {
  std::string task;
  std::string source;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<Normalization> normalization;
  std::vector<ReportRow> rows;

  bool operator==(const ExperimentReport&) const = default;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generates or loads the data for one replicate at one N.
TrainTestPair replicate_data(const ExperimentConfig& config, Index n, int replicate);

/// Runs one method on one dataset; failures are returned in Record::error.
Record run_method(const MethodSpec& method, const TrainTestPair& data,
                  const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentResult {
  std::vector<Record> records;  // ordered by (N, replicate, method)
  ExperimentReport report;
};

/// Runs every replicate (in parallel) and aggregates. Method failures are
/// kept in the records rather than thrown.
ExperimentResult run_records(const ExperimentConfig& config);

/// Throws ExperimentError when some method fails on more than
/// max_failure_rate of the replicates at some N.
void check_failures(const std::vector<Record>& records, const ExperimentConfig& config);

/// One line per failed record.
std::string failure_log(const std::vector<Record>& records);

/// run_records, then raw.csv, report.json, report.csv, figure.svg and
/// manifest.json in config.output_dir. When check_failures throws, raw.csv
/// and errors.log are written before the exception propagates.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Aggregation of records; methods appear in config order, then by N.
ExperimentReport aggregate(const std::vector<Record>& records, const ExperimentConfig& config);

/// Divides every loss by the UW mean loss (and ESS by the UW mean ESS) of the
/// same N. Applying it to an already normalized report changes nothing.
void normalize(ExperimentReport& report);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

std::string report_csv(const ExperimentReport& report);
std::string report_svg(const ExperimentReport& report);
std::string records_csv(const std::vector<Record>& records);
std::vector<Record> parse_records_csv(const std::string& text);

enum class Format { kCsv, kJson, kSvg };
void emit_report(const ExperimentReport& report, Format format,
                 const std::filesystem::path& file);

}  // namespace edr::experiment
