#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/model.hpp"

namespace fesog {

enum class Split { kTrain, kValid, kTest };

std::string_view split_name(Split s);

struct MetricsRecord {
  std::uint64_t round = 0;
  Split split = Split::kValid;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_ratings = 0;

  bool operator==(const MetricsRecord&) const = default;
};

struct EvalOptions {
  bool clamp = true;
  std::size_t threads = 1;
};

/// Pooled RMSE and MAE over `ratings`. Each user's embedding is inferred from
/// its training graph; predictions are optionally clamped to `scale`.
/// Throws std::invalid_argument on an empty split.
MetricsRecord evaluate(const ParameterSet& theta, std::span<const LocalGraph> graphs,
                       std::span<const RatingTriple> ratings, RatingScale scale,
                       const EvalOptions& opts = {}, std::uint64_t round = 0,
                       Split split = Split::kValid);

/// RMSE and MAE of raw (truth, prediction) pairs.
MetricsRecord score_predictions(std::span<const double> truth, std::span<const double> predicted);

struct StopDecision {
  bool stop = false;
  std::size_t best_index = 0;   // position in the history
  std::uint64_t best_round = 0;
};

/// Stops once `patience` validations in a row failed to beat the best RMSE.
/// The earliest round wins ties. An empty history continues.
StopDecision early_stopper(std::span<const MetricsRecord> history, std::size_t patience);

/// `round,split,rmse,mae,n` header then one row per record.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);

}  // namespace fesog
