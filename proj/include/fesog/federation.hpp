#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/eval.hpp"
#include "fesog/grad.hpp"
#include "fesog/model.hpp"
#include "fesog/privacy.hpp"
#include "fesog/rng.hpp"

namespace fesog {

struct RoundConfig {
  std::size_t batch_size = 64;
  double eta = 0.05;
  std::size_t max_rounds = 1000;
  std::size_t patience = 5;
  std::size_t eval_every = 10;

  void validate() const;
};

/// How per-entity embedding gradients are weighted.
enum class AggregationMode {
  // Numerator weighted by the client's interaction count, denominator by the
  // entity's per-client loss-term count.
  kInteraction,
  // Numerator and denominator both weighted by the entity's loss-term count.
  kPerEntity,
};

/// Everything a client needs besides its graph and the parameters.
struct ClientConfig {
  LdpConfig ldp;
  PseudoConfig pseudo;
  LossDenominator denominator = LossDenominator::kReal;
};

struct ServerMessage {
  std::uint64_t round = 0;
  const ParameterSet* params = nullptr;
};

struct ClientMessage {
  std::uint64_t round = 0;
  GradientPacket packet;
  double train_loss = 0.0;  // local loss before protection, for the round log
};

/// Runs one client's local step. Returns nullopt when the client has no rated
/// items and therefore sits this round out.
std::optional<ClientMessage> client_update(const ServerMessage& msg, const LocalGraph& graph,
                                           const ClientConfig& cfg, Engine& rng);

struct AveragedGradients {
  ModelWeights model;
  std::map<ItemId, Vec> items;
  std::map<UserId, Vec> users;
};

/// Per-round aggregation denominators: the summed interaction counts for
/// the model weights and the summed per-client loss-term counts per entity.
/// An entity with a zero denominator receives no update.
struct AggregateState {
  double model_den = 0.0;
  std::map<ItemId, double> item_den;
  std::map<UserId, double> user_den;
};

AggregateState collect_denominators(std::span<const ClientMessage> messages);

/// Weighted average of a round's packets. Each packet contributes
/// (weight / denominator) * gradient, summed in message order; the weight is
/// the interaction count, or for embeddings in kPerEntity mode the entity's
/// loss-term count. Throws std::invalid_argument for an empty list.
AveragedGradients aggregate(std::span<const ClientMessage> messages, AggregationMode mode);

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// theta -= eta * g for the model weights and every entity present in g.
/// Throws NonFiniteGradient, leaving theta untouched, if any entry of g is
/// not finite.
void apply_update(ParameterSet& theta, const AveragedGradients& g, double eta);

struct RoundTrace {
  std::uint64_t round = 0;
  std::size_t batch = 0;
  std::size_t packets = 0;
  double train_loss_mean = 0.0;
  double wall_ms = 0.0;
  std::string note;  // "skipped" / "aborted: ..." when the round did not update
};

struct ServerConfig {
  RoundConfig round;
  ClientConfig client;
  AggregationMode aggregation = AggregationMode::kInteraction;
  EvalOptions eval;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TrainingResult {
  ParameterSet best;
  std::uint64_t best_round = 0;
  std::size_t rounds_run = 0;
  std::vector<MetricsRecord> history;  // validation records
  std::vector<RoundTrace> trace;
};

/// Observer called after every round with the updated parameters.
using RoundObserver = std::function<void(const RoundTrace&, const ParameterSet&)>;

/// Uniform sample without replacement of min(batch, n_clients) client ids,
/// returned sorted.
std::vector<UserId> sample_clients(std::size_t n_clients, std::size_t batch, Engine& rng);

/// The training loop. Validation runs every `eval_every` rounds when `valid`
/// is non-empty; the parameters of the best validation are returned.
TrainingResult run_server(ParameterSet theta, std::span<const LocalGraph> graphs,
                          std::span<const RatingTriple> valid, const ServerConfig& cfg,
                          const RoundObserver& observer = {});

}  // namespace fesog
