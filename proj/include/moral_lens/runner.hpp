#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "moral_lens/compass.hpp"
#include "moral_lens/gateway.hpp"
#include "moral_lens/metrics.hpp"
#include "moral_lens/types.hpp"

namespace moral_lens {

struct ValueSpec {
  MoralValue value;
  std::string instrument;  // instrument id carrying the value's items
};

struct ModelSpec {
  std::string id;
  std::string backend;
  DecodeConfig decode;
};

/// type "scripted": offline backend (optional "fixtures" file mapping prompt
/// hash -> completion text, synthetic answers otherwise).
/// type "openai_chat": base_url, path, api_key_env, timeout_s.
struct BackendSpec {
  std::string id;
  std::string type;
  std::size_t max_concurrency = 4;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
};

struct JudgeSpec {
  std::string backend;
  std::string model;
  DecodeConfig decode;
  std::size_t sample_size = 200;
  std::uint64_t seed = 0;  // required in the config file
};

struct CohortSpec {
  std::filesystem::path participants;
  std::vector<ValueSpec> values;
  std::size_t n_per_group = 30;
  std::uint64_t seed = 42;
};

/// Declarative experiment plan. Relative paths are resolved against the
/// directory of the config file.
struct ExperimentConfig {
  std::string run_id;
  std::vector<std::filesystem::path> instruments;
  std::filesystem::path weights;
  std::optional<std::filesystem::path> templates_dir;
  std::vector<ValueSpec> values;
  std::vector<Framing> framings;  // conditioned framings only
  bool include_base = true;
  std::vector<ModelSpec> models;
  std::vector<BackendSpec> backends;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path out_dir = "runs";
  std::size_t max_concurrency = 4;
  bool allow_partial = false;
  RetryPolicy retry;
  std::optional<std::vector<std::string>> refusal_phrases;
  std::optional<JudgeSpec> judge;
  std::optional<CohortSpec> cohort;

  static ExperimentConfig parse(std::string_view json_text, const std::filesystem::path& base_dir,
                                std::string_view origin = "<config>");
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Resolved plan as persisted in the run directory. Leaves out out_dir so
  /// that the same plan written to two places snapshots identically.
  nlohmann::ordered_json snapshot() const;

  /// Every cell in execution order: per model, the base cell (if enabled),
  /// then value x stance x framing.
  std::vector<CellKey> cells() const;
};

struct PropositionOutcome {
  int proposition_id = 0;
  std::optional<int> label;
  std::string reason;
  std::string status = "ok";  // "ok" or the error code
  std::string error;
  int attempts = 0;
  std::string prompt_hash;
};

/// Persisted result of one cell.
struct CellResult {
  CellKey key;
  std::string backend_id;
  std::optional<std::string> instrument_id;
  std::optional<std::string> profile_id;
  std::string status;  // complete | partial | failed
  std::optional<Coordinates> coordinates;
  bool renormalized = false;
  std::vector<PropositionOutcome> responses;

  std::size_t answered() const;
  std::size_t refusals() const;
  std::size_t parse_failures() const;
  std::size_t gateway_failures() const;
  PctResponseSet response_set() const;

  std::string serialize() const;
  static CellResult parse(std::string_view text, std::string_view origin);
};

/// File name (without directory) of a cell document.
std::string cell_file_name(const CellKey& key);

struct PairRow {
  std::string model_id;
  MoralValue value;
  Framing framing = Framing::first;
  Coordinates reject;
  Coordinates endorse;
  ShiftVector delta;
  double strong_reject = 0.0;
  double strong_endorse = 0.0;
  double stance_reversal = 0.0;
};

struct DistanceRow {
  std::string model_id;
  MoralValue value;
  Stance stance = Stance::endorse;
  double mean_abs_distance = 0.0;  // candidate-voter vs first-person labels
};

struct RunMetrics {
  std::vector<MetricsSummary> summaries;
  std::vector<PairRow> pairs;
  std::vector<DistanceRow> vote_vs_first;
  std::vector<std::string> notes;
};

/// Builds ensembles from every (endorse, reject) pair with coordinates.
/// Rows follow the given value and framing order.
RunMetrics compute_run_metrics(const std::vector<CellResult>& cells,
                               const std::vector<ValueSpec>& values,
                               const std::vector<Framing>& framings,
                               const std::vector<ModelSpec>& models);

struct RunOptions {
  bool replay = false;
  std::optional<std::size_t> max_concurrency;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> run_id;
  /// Replace config-declared backends with the same id (tests, embedding).
  std::vector<std::shared_ptr<Backend>> backend_overrides;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::size_t planned_cells = 0;
  std::size_t complete_cells = 0;
  std::size_t partial_cells = 0;
  std::size_t failed_cells = 0;
  std::size_t skipped_cells = 0;  // already complete on resume
  std::size_t answered = 0;
  std::size_t missing = 0;
  std::size_t refusals = 0;
  std::size_t backend_calls = 0;
};

/// Loaded experiment: data, templates, gateway and the run directory.
class Experiment {
 public:
  Experiment(ExperimentConfig config, RunOptions options = {});
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const;
  std::filesystem::path run_dir() const;

  /// Checks everything that can be checked without a backend; returns a
  /// human-readable plan description.
  std::string validate() const;

  /// Fresh run: fails with ConfigError if the run directory already holds a
  /// manifest. Runs cells, metrics, judge, cohort and report.
  RunSummary run();
  /// Continues an existing run; complete cells are not recomputed.
  RunSummary resume();

  RunMetrics metrics();
  void judge();
  void cohort();
  void report();

  std::vector<CellResult> load_cells() const;
  std::size_t backend_calls() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace moral_lens
