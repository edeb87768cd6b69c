#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/eval.hpp"
#include "fesog/federation.hpp"
#include "fesog/model.hpp"

namespace fesog {

/// Invalid or unknown config entry; `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// One fully resolved experiment.
///
/// Config files are flat `section.key = value` text:
///
///   dataset.manifest          path to a DatasetManifest (relative to the config)
///   seed                      master seed
///   model.d                   embedding size
///   model.share_gat_layers    true|false
///   model.use_relation_vectors true|false
///   train.batch_size / train.eta / train.max_rounds / train.patience / train.eval_every
///   ldp.delta / ldp.lambda / ldp.dynamic
///   pseudo.p                  pseudo items per client
///   loss.denominator          real|union
///   aggregation.mode          interaction|per-entity
///   eval.clamp                true|false
///   output.dir                output directory (relative to the config)
///
/// Any value may be a comma-separated list; the file then describes the
/// Cartesian product of all list-valued keys.
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::uint64_t seed = 42;
  HyperConfig model;
  RoundConfig round;
  LdpConfig ldp;
  std::size_t pseudo_items = 10;
  LossDenominator denominator = LossDenominator::kReal;
  AggregationMode aggregation = AggregationMode::kInteraction;
  bool clamp_eval = true;
  std::filesystem::path out_dir = "out";

  /// Sets one field from its text form. Paths are resolved against `base`.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base);
  void validate() const;

  /// Canonical `key = value` text of every field; parses back to *this.
  std::string to_text() const;
};

/// A config file before grid expansion.
class ConfigGrid {
 public:
  static ConfigGrid load(const std::filesystem::path& path);
  static ConfigGrid parse(std::istream& in, const std::filesystem::path& base,
                          const std::string& source = "config");

  /// Replaces a key's values (used by sweeps and CLI overrides).
  void override(const std::string& key, std::vector<std::string> values);
  /// Keys with more than one value, in file order.
  std::vector<std::string> grid_keys() const;
  std::vector<ExperimentConfig> expand() const;

 private:
  std::filesystem::path base_;
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
};

/// Short sweep axis names mapped to config keys.
std::optional<std::string> axis_key(const std::string& axis);

struct RunSummary {
  MetricsRecord best_valid;
  MetricsRecord test;
  std::uint64_t best_round = 0;
  std::size_t rounds_run = 0;
  std::vector<MetricsRecord> records;  // validation history then the test record
  ParameterSet best;
};

struct RunOptions {
  std::size_t threads = 1;
  bool write_outputs = true;
  std::ostream* log = nullptr;
};

/// Splits, trains, evaluates on test. When `opts.write_outputs` is set, the
/// config's out_dir receives metrics.csv, checkpoint.bin, rounds.log and
/// run_manifest.txt.
RunSummary run_experiment(const ExperimentConfig& cfg, const DatasetBundle& unsplit,
                          const RunOptions& opts);
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// Git blob hash ("blob <len>\0<bytes>", SHA-1, hex) of a file.
std::string git_blob_hash(const std::filesystem::path& path);

/// CLI entry points; return a process exit status.
int run_command(const std::filesystem::path& config, std::optional<std::filesystem::path> out,
                std::size_t threads, std::ostream& log, std::ostream& err);
int sweep_command(const std::filesystem::path& config, const std::string& axis,
                  const std::vector<std::string>& values,
                  std::optional<std::filesystem::path> out, std::size_t threads,
                  std::ostream& log, std::ostream& err);

}  // namespace fesog
