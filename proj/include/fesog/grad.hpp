#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/model.hpp"

namespace fesog {

inline constexpr double kLossEpsilon = 1e-12;

/// What the loss is divided by under the square root.
enum class LossDenominator {
  kReal,   // |real items| only, pseudo residuals still summed
  kUnion,  // |real items| + |pseudo items|
};

struct LossInputs {
  std::vector<std::pair<ItemId, double>> real;
  std::vector<std::pair<ItemId, double>> pseudo;
  LossDenominator denominator = LossDenominator::kReal;
};

struct LossValue {
  double value = 0.0;
  double denominator = 0.0;
  // Item ids and (target - prediction), real items first then pseudo items.
  std::vector<std::pair<ItemId, double>> residuals;
};

/// RMSE-form loss sqrt(sum r^2 / D + eps) over real and pseudo residuals.
/// Returns nullopt when there is nothing to train on (no terms, or D = 0).
std::optional<LossValue> local_loss(const ForwardTrace& trace, const ParameterSet& theta,
                                    const LossInputs& inputs);

/// A client's upload.
struct GradientPacket {
  UserId owner = 0;
  std::map<ItemId, Vec> item_grads;
  std::map<UserId, Vec> user_grads;
  ModelWeights model_grads;
  double interaction_count = 0.0;
  // Loss terms each embedding participates in, used as aggregation denominators.
  std::map<ItemId, double> item_counts;
  std::map<UserId, double> user_counts;

  bool operator==(const GradientPacket&) const = default;
};

/// Reverse pass of local_loss through predict, aggregate and both attention
/// layers. `loss` must come from local_loss on the same trace and inputs.
GradientPacket backward(const ParameterSet& theta, const LocalGraph& graph,
                        const ForwardTrace& trace, const LossInputs& inputs,
                        const LossValue& loss);

/// forward + local_loss; convenience for oracles. Returns 0 when skipped.
double loss_at(const ParameterSet& theta, const LocalGraph& graph, const LossInputs& inputs);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vec central_difference(const std::function<double(std::span<const double>)>& f, Vec x,
                       double h);

/// Dense central-difference gradient of loss_at with respect to every entry
/// of theta. Cost is two forward passes per parameter.
ParameterSet finite_difference_oracle(const ParameterSet& theta, const LocalGraph& graph,
                                      const LossInputs& inputs, double h);

/// Scatters a sparse packet into a dense parameter-shaped gradient.
ParameterSet densify(const GradientPacket& packet, const ParameterSet& like);

}  // namespace fesog
