#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/grad.hpp"
#include "fesog/model.hpp"
#include "fesog/rng.hpp"

namespace fesog {

struct LdpConfig {
  double delta = 0.3;   // entrywise clip threshold
  double lambda = 0.1;  // noise strength
  bool dynamic = true;  // scale noise by the clipped tensor's mean magnitude

  void validate() const;
};

struct PseudoConfig {
  std::size_t p = 0;
  RatingScale scale;
};

/// Uniform sample without replacement of min(p, M - |rated|) items the client
/// has not rated.
std::vector<ItemId> sample_pseudo_items(const LocalGraph& graph, std::size_t p,
                                        std::size_t n_items, Engine& rng);

/// Rounds half up and clamps into the rating scale.
double round_rating(double prediction, RatingScale scale);

/// Labels each pseudo item with the client's own rounded prediction.
std::vector<std::pair<ItemId, double>> pseudo_label(const ForwardTrace& trace,
                                                    std::span<const ItemId> pseudo_ids,
                                                    const ParameterSet& theta, RatingScale scale);

/// Inverse-CDF Laplace(0, b) draw for a given u in (-0.5, 0.5).
double laplace_from_uniform(double b, double u);
double laplace_sample(double b, Engine& rng);

/// Per-tensor noise scale: lambda in static mode, lambda * mean|x| over the
/// already clipped tensor in dynamic mode.
double noise_scale(std::span<const double> clipped, const LdpConfig& cfg);

/// Clips every gradient entry to [-delta, delta] then adds Laplace noise per
/// tensor. Tensors are the nine model weights, all item gradients together
/// and all user gradients together, processed in that order. Counts pass
/// through unchanged.
GradientPacket protect(GradientPacket packet, const LdpConfig& cfg, Engine& rng);

}  // namespace fesog
