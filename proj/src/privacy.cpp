#include "fesog/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace fesog {

void LdpConfig::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("ldp.delta must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("ldp.lambda must be >= 0");
}

std::vector<ItemId> sample_pseudo_items(const LocalGraph& graph, std::size_t p,
                                        std::size_t n_items, Engine& rng) {
  if (p == 0) return {};
  std::vector<char> rated(n_items, 0);
  std::size_t n_rated = 0;
  for (const auto& [item, r] : graph.rated_items) {
    if (item < n_items && !rated[item]) {
      rated[item] = 1;
      ++n_rated;
    }
  }
  const std::size_t available = n_items - n_rated;
  const std::size_t want = std::min(p, available);
  std::vector<ItemId> out;
  out.reserve(want);

  if (2 * want < available) {
    // Sparse draw: rejection against the rated set and earlier picks.
    std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
    std::unordered_set<ItemId> taken;
    while (out.size() < want) {
      const auto t = static_cast<ItemId>(pick(rng));
      if (rated[t] || !taken.insert(t).second) continue;
      out.push_back(t);
    }
    return out;
  }

  std::vector<ItemId> pool;
  pool.reserve(available);
  for (std::size_t t = 0; t < n_items; ++t)
    if (!rated[t]) pool.push_back(static_cast<ItemId>(t));
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(want);
  return pool;
}

double round_rating(double prediction, RatingScale scale) {
  const double r = std::floor(prediction + 0.5);
  return std::clamp(r, static_cast<double>(scale.min), static_cast<double>(scale.max));
}

std::vector<std::pair<ItemId, double>> pseudo_label(const ForwardTrace& trace,
                                                    std::span<const ItemId> pseudo_ids,
                                                    const ParameterSet& theta, RatingScale scale) {
  const auto preds = predict(trace.user_embedding(), pseudo_ids, theta);
  std::vector<std::pair<ItemId, double>> out;
  out.reserve(pseudo_ids.size());
  for (std::size_t i = 0; i < pseudo_ids.size(); ++i)
    out.emplace_back(pseudo_ids[i], round_rating(preds[i], scale));
  return out;
}

double laplace_from_uniform(double b, double u) {
  if (b == 0.0 || u == 0.0) return 0.0;
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return -b * sign * std::log(1.0 - 2.0 * std::abs(u));
}

double laplace_sample(double b, Engine& rng) {
  if (b < 0.0) throw std::invalid_argument("laplace scale must be >= 0");
  if (b == 0.0) return 0.0;
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double u = unif(rng);
  while (u == -0.5) u = unif(rng);  // log(0) at the open end
  return laplace_from_uniform(b, u);
}

double noise_scale(std::span<const double> clipped, const LdpConfig& cfg) {
  if (!cfg.dynamic) return cfg.lambda;
  if (clipped.empty()) return 0.0;
  double total = 0.0;
  for (double x : clipped) total += std::abs(x);
  return cfg.lambda * total / static_cast<double>(clipped.size());
}

namespace {

void clip(std::span<double> xs, double delta) {
  for (auto& x : xs) x = std::clamp(x, -delta, delta);
}

void add_noise(std::span<double> xs, double b, Engine& rng) {
  if (b == 0.0) return;
  for (auto& x : xs) x += laplace_sample(b, rng);
}

template <class Map>
void protect_map(Map& grads, const LdpConfig& cfg, Engine& rng) {
  for (auto& [id, v] : grads) clip(v, cfg.delta);
  double b = cfg.lambda;
  if (cfg.dynamic) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [id, v] : grads) {
      for (double x : v) total += std::abs(x);
      n += v.size();
    }
    b = n == 0 ? 0.0 : cfg.lambda * total / static_cast<double>(n);
  }
  for (auto& [id, v] : grads) add_noise(v, b, rng);
}

}  // namespace

GradientPacket protect(GradientPacket packet, const LdpConfig& cfg, Engine& rng) {
  cfg.validate();
  for (auto tag : kAllWeightTags) {
    auto t = packet.model_grads.tensor(tag);
    clip(t, cfg.delta);
    add_noise(t, noise_scale(t, cfg), rng);
  }
  protect_map(packet.item_grads, cfg, rng);
  protect_map(packet.user_grads, cfg, rng);
  return packet;
}

}  // namespace fesog
