#include "fesog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "fesog/parallel.hpp"

namespace fesog {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

MetricsRecord score_predictions(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.empty()) throw std::invalid_argument("cannot score an empty split");
  if (truth.size() != predicted.size()) throw std::invalid_argument("length mismatch");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - predicted[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(truth.size());
  MetricsRecord rec;
  rec.n_ratings = truth.size();
  rec.mae = abs_sum / n;
  rec.rmse = std::sqrt(sq_sum / n);
  return rec;
}

MetricsRecord evaluate(const ParameterSet& theta, std::span<const LocalGraph> graphs,
                       std::span<const RatingTriple> ratings, RatingScale scale,
                       const EvalOptions& opts, std::uint64_t round, Split split) {
  if (ratings.empty()) throw std::invalid_argument("cannot evaluate an empty split");

  std::vector<UserId> users;
  users.reserve(ratings.size());
  for (const auto& r : ratings) users.push_back(r.user);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());

  std::vector<Vec> embeddings(users.size());
  parallel_for(users.size(), opts.threads, [&](std::size_t i) {
    embeddings[i] = forward(theta, graphs[users[i]]).agg.user_embedding;
  });

  Vec truth;
  Vec pred;
  truth.reserve(ratings.size());
  pred.reserve(ratings.size());
  for (const auto& r : ratings) {
    const auto slot = std::lower_bound(users.begin(), users.end(), r.user) - users.begin();
    if (r.item >= theta.n_items()) throw std::out_of_range("item id out of range");
    double p = linalg::dot(embeddings[slot], theta.items.row(r.item));
    if (opts.clamp) p = std::clamp(p, static_cast<double>(scale.min), static_cast<double>(scale.max));
    truth.push_back(r.rating);
    pred.push_back(p);
  }
  auto rec = score_predictions(truth, pred);
  rec.round = round;
  rec.split = split;
  return rec;
}

StopDecision early_stopper(std::span<const MetricsRecord> history, std::size_t patience) {
  StopDecision d;
  if (history.empty()) return d;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].rmse < history[d.best_index].rmse) d.best_index = i;
  d.best_round = history[d.best_index].round;
  d.stop = history.size() - 1 - d.best_index >= patience;
  return d;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << "round,split,rmse,mae,n\n";
  const auto old = out.precision(17);
  for (const auto& r : records)
    out << r.round << ',' << split_name(r.split) << ',' << r.rmse << ',' << r.mae << ','
        << r.n_ratings << '\n';
  out.precision(old);
}

}  // namespace fesog
