#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fesog/data.hpp"
#include "fesog/matrix.hpp"

namespace fesog {

inline constexpr double kLeakySlope = 0.01;

struct HyperConfig {
  std::size_t d = 8;
  // Item branch reuses the social mapping and attention vector.
  bool share_gat_layers = false;
  // When false the branch weights are uniform over the present branches.
  bool use_relation_vectors = true;

  bool operator==(const HyperConfig&) const = default;
};

enum class WeightTag : std::uint8_t {
  kWSocial = 0,
  kWItem,
  kWHidden,
  kAttSocial,
  kAttItem,
  kAttRelation,
  kRelSocial,
  kRelItem,
  kRelSelf,
};

inline constexpr std::size_t kNumWeightTags = 9;

std::string_view weight_name(WeightTag tag);

/// The dense (non-embedding) part of the model.
struct ModelWeights {
  Matrix w_social;  // d x d, maps user pairs before social attention
  Matrix w_item;    // d x d, maps user-item pairs before item attention
  Matrix w_hidden;  // d x d, shared neighbor mapping for aggregation
  Vec att_social;   // 2d
  Vec att_item;     // 2d
  Vec att_relation; // 2d
  Vec rel_social;   // d
  Vec rel_item;     // d
  Vec rel_self;     // d

  static ModelWeights zeros(std::size_t d);

  std::span<double> tensor(WeightTag tag);
  std::span<const double> tensor(WeightTag tag) const;

  bool operator==(const ModelWeights&) const = default;
};

inline constexpr std::array<WeightTag, kNumWeightTags> kAllWeightTags = {
    WeightTag::kWSocial,   WeightTag::kWItem,   WeightTag::kWHidden,
    WeightTag::kAttSocial, WeightTag::kAttItem, WeightTag::kAttRelation,
    WeightTag::kRelSocial, WeightTag::kRelItem, WeightTag::kRelSelf};

struct ParameterSet {
  Matrix users;  // N x d
  Matrix items;  // M x d
  ModelWeights model;
  HyperConfig cfg;

  std::size_t dim() const { return cfg.d; }
  std::size_t n_users() const { return users.rows(); }
  std::size_t n_items() const { return items.rows(); }

  /// Same shapes, all zeros.
  ParameterSet zeros_like() const;

  bool operator==(const ParameterSet&) const = default;
};

/// Every entry i.i.d. N(0, 1) from a std::mt19937_64 seeded with `seed`, in
/// the order users, items, then weights by WeightTag.
ParameterSet init_parameters(std::size_t n_users, std::size_t n_items, const HyperConfig& cfg,
                             std::uint64_t seed);

/// Intermediates of one attention layer over a neighbor list.
struct AttentionTrace {
  Vec center_mapped;          // W e_center
  std::vector<Vec> mapped;    // W e_neighbor
  Vec pre_activation;         // att^T [W e_center || W e_neighbor]
  Vec weights;                // softmax(LeakyReLU(pre_activation))
};

AttentionTrace social_attention_trace(const ParameterSet& theta, UserId center,
                                      std::span<const UserId> neighbors);
AttentionTrace item_attention_trace(const ParameterSet& theta, UserId center,
                                    std::span<const ItemId> items);

/// Attention weights over social neighbors. Requires at least one neighbor.
Vec social_attention(const ParameterSet& theta, UserId center, std::span<const UserId> neighbors);
/// Attention weights over rated items. Requires at least one item.
Vec item_attention(const ParameterSet& theta, UserId center, std::span<const ItemId> items);

/// Branch mixing of the center, social and item views.
struct Aggregation {
  bool has_social = false;
  bool has_items = false;
  std::vector<Vec> hidden_social;  // W_h e_up
  std::vector<Vec> hidden_items;   // W_h e_tk
  Vec h_social;                    // zero when absent
  Vec h_items;                     // zero when absent
  double score_self = 0.0;
  double score_social = 0.0;
  double score_items = 0.0;
  double gamma_self = 1.0;
  double gamma_social = 0.0;
  double gamma_items = 0.0;
  Vec user_embedding;              // inferred e*_u
};

Aggregation aggregate(const ParameterSet& theta, const LocalGraph& graph,
                      std::span<const double> alpha, std::span<const double> beta);

struct ForwardTrace {
  UserId owner = 0;
  std::vector<UserId> social;
  std::vector<ItemId> items;
  AttentionTrace social_att;
  AttentionTrace item_att;
  Aggregation agg;

  std::span<const double> user_embedding() const { return agg.user_embedding; }
};

/// Full local inference for one client.
ForwardTrace forward(const ParameterSet& theta, const LocalGraph& graph);

/// Dot products of the inferred user embedding with each item embedding.
/// Throws std::out_of_range for an unknown item.
Vec predict(std::span<const double> user_embedding, std::span<const ItemId> items,
            const ParameterSet& theta);

double leaky_relu(double x);
Vec softmax(std::span<const double> scores);

}  // namespace fesog
