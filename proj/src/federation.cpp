#include "fesog/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fesog/parallel.hpp"

namespace fesog {

void RoundConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(eta > 0.0)) throw std::invalid_argument("train.eta must be > 0");
  if (patience < 1) throw std::invalid_argument("train.patience must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train.eval_every must be >= 1");
}

std::optional<ClientMessage> client_update(const ServerMessage& msg, const LocalGraph& graph,
                                           const ClientConfig& cfg, Engine& rng) {
  if (graph.rated_items.empty()) return std::nullopt;
  const ParameterSet& theta = *msg.params;

  const auto trace = forward(theta, graph);
  const auto pseudo_ids = sample_pseudo_items(graph, cfg.pseudo.p, theta.n_items(), rng);

  LossInputs inputs;
  inputs.real = graph.rated_items;
  inputs.pseudo = pseudo_label(trace, pseudo_ids, theta, cfg.pseudo.scale);
  inputs.denominator = cfg.denominator;

  const auto loss = local_loss(trace, theta, inputs);
  if (!loss) return std::nullopt;

  ClientMessage out;
  out.round = msg.round;
  out.train_loss = loss->value;
  out.packet = protect(backward(theta, graph, trace, inputs, *loss), cfg.ldp, rng);
  return out;
}

AggregateState collect_denominators(std::span<const ClientMessage> messages) {
  AggregateState st;
  for (const auto& m : messages) {
    const auto& p = m.packet;
    st.model_den += p.interaction_count;
    for (const auto& [t, g] : p.item_grads) {
      const auto c = p.item_counts.find(t);
      st.item_den[t] += c == p.item_counts.end() ? 1.0 : c->second;
    }
    for (const auto& [u, g] : p.user_grads) {
      const auto c = p.user_counts.find(u);
      st.user_den[u] += c == p.user_counts.end() ? 1.0 : c->second;
    }
  }
  return st;
}

namespace {

template <class Id>
void accumulate(std::map<Id, Vec>& out, const std::map<Id, double>& den,
                const std::map<Id, Vec>& grads, const std::map<Id, double>& counts,
                double weight, AggregationMode mode) {
  for (const auto& [id, g] : grads) {
    const double q = den.at(id);
    if (q <= 0.0) continue;
    double w = weight;
    if (mode == AggregationMode::kPerEntity) {
      const auto c = counts.find(id);
      w = c == counts.end() ? 1.0 : c->second;
    }
    auto [it, inserted] = out.try_emplace(id);
    if (inserted) it->second.assign(g.size(), 0.0);
    linalg::axpy(w / q, g, it->second);
  }
}

}  // namespace

AveragedGradients aggregate(std::span<const ClientMessage> messages, AggregationMode mode) {
  if (messages.empty()) throw std::invalid_argument("aggregate needs at least one packet");
  const std::size_t d = messages.front().packet.model_grads.rel_self.size();
  const auto den = collect_denominators(messages);

  AveragedGradients out;
  out.model = ModelWeights::zeros(d);
  for (const auto& m : messages) {
    const auto& p = m.packet;
    if (den.model_den > 0.0) {
      const double w = p.interaction_count / den.model_den;
      for (auto tag : kAllWeightTags) linalg::axpy(w, p.model_grads.tensor(tag), out.model.tensor(tag));
    }
    accumulate(out.items, den.item_den, p.item_grads, p.item_counts, p.interaction_count, mode);
    accumulate(out.users, den.user_den, p.user_grads, p.user_counts, p.interaction_count, mode);
  }
  return out;
}

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void apply_update(ParameterSet& theta, const AveragedGradients& g, double eta) {
  for (auto tag : kAllWeightTags)
    if (!all_finite(g.model.tensor(tag)))
      throw NonFiniteGradient("non-finite gradient in " + std::string(weight_name(tag)));
  for (const auto& [t, v] : g.items)
    if (!all_finite(v)) throw NonFiniteGradient("non-finite gradient for item " + std::to_string(t));
  for (const auto& [u, v] : g.users)
    if (!all_finite(v)) throw NonFiniteGradient("non-finite gradient for user " + std::to_string(u));

  for (auto tag : kAllWeightTags) linalg::axpy(-eta, g.model.tensor(tag), theta.model.tensor(tag));
  for (const auto& [t, v] : g.items) linalg::axpy(-eta, v, theta.items.row(t));
  for (const auto& [u, v] : g.users) linalg::axpy(-eta, v, theta.users.row(u));
}

std::vector<UserId> sample_clients(std::size_t n_clients, std::size_t batch, Engine& rng) {
  std::vector<UserId> pool(n_clients);
  std::iota(pool.begin(), pool.end(), UserId{0});
  const std::size_t want = std::min(batch, n_clients);
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_clients - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(want);
  std::sort(pool.begin(), pool.end());
  return pool;
}

TrainingResult run_server(ParameterSet theta, std::span<const LocalGraph> graphs,
                          std::span<const RatingTriple> valid, const ServerConfig& cfg,
                          const RoundObserver& observer) {
  cfg.round.validate();
  cfg.client.ldp.validate();
  using Clock = std::chrono::steady_clock;

  TrainingResult result;
  result.best = theta;
  bool have_best = false;

  for (std::uint64_t r = 0; r < cfg.round.max_rounds; ++r) {
    const auto start = Clock::now();
    auto sampler = make_engine(cfg.seed, Stream::kClientSampling, r);
    const auto batch = sample_clients(graphs.size(), cfg.round.batch_size, sampler);

    std::vector<std::optional<ClientMessage>> slots(batch.size());
    const ServerMessage msg{r, &theta};
    parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
      auto rng = make_engine(cfg.seed, Stream::kClient, r, batch[i]);
      slots[i] = client_update(msg, graphs[batch[i]], cfg.client, rng);
    });

    std::vector<ClientMessage> messages;
    for (auto& s : slots)
      if (s) messages.push_back(std::move(*s));

    RoundTrace rt;
    rt.round = r;
    rt.batch = batch.size();
    rt.packets = messages.size();
    if (messages.empty()) {
      rt.note = "skipped";
    } else {
      double loss_sum = 0.0;
      for (const auto& m : messages) loss_sum += m.train_loss;
      rt.train_loss_mean = loss_sum / static_cast<double>(messages.size());
      try {
        apply_update(theta, aggregate(messages, cfg.aggregation), cfg.round.eta);
      } catch (const NonFiniteGradient& e) {
        rt.note = std::string("aborted: ") + e.what();
      }
    }
    rt.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    result.trace.push_back(rt);
    result.rounds_run = r + 1;
    if (observer) observer(rt, theta);

    if (!valid.empty() && (r + 1) % cfg.round.eval_every == 0) {
      result.history.push_back(
          evaluate(theta, graphs, valid, cfg.client.pseudo.scale, cfg.eval, r + 1, Split::kValid));
      const auto decision = early_stopper(result.history, cfg.round.patience);
      if (decision.best_index + 1 == result.history.size()) {
        result.best = theta;
        result.best_round = r + 1;
        have_best = true;
      }
      if (decision.stop) break;
    }
  }

  if (!have_best) {
    result.best = std::move(theta);
    result.best_round = result.rounds_run;
  }
  return result;
}

}  // namespace fesog
