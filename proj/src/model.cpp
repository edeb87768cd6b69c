#include "fesog/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fesog {

std::string_view weight_name(WeightTag tag) {
  switch (tag) {
    case WeightTag::kWSocial: return "w_social";
    case WeightTag::kWItem: return "w_item";
    case WeightTag::kWHidden: return "w_hidden";
    case WeightTag::kAttSocial: return "att_social";
    case WeightTag::kAttItem: return "att_item";
    case WeightTag::kAttRelation: return "att_relation";
    case WeightTag::kRelSocial: return "rel_social";
    case WeightTag::kRelItem: return "rel_item";
    case WeightTag::kRelSelf: return "rel_self";
  }
  throw std::invalid_argument("unknown weight tag");
}

ModelWeights ModelWeights::zeros(std::size_t d) {
  ModelWeights w;
  w.w_social = Matrix(d, d);
  w.w_item = Matrix(d, d);
  w.w_hidden = Matrix(d, d);
  w.att_social.assign(2 * d, 0.0);
  w.att_item.assign(2 * d, 0.0);
  w.att_relation.assign(2 * d, 0.0);
  w.rel_social.assign(d, 0.0);
  w.rel_item.assign(d, 0.0);
  w.rel_self.assign(d, 0.0);
  return w;
}

std::span<double> ModelWeights::tensor(WeightTag tag) {
  switch (tag) {
    case WeightTag::kWSocial: return w_social.flat();
    case WeightTag::kWItem: return w_item.flat();
    case WeightTag::kWHidden: return w_hidden.flat();
    case WeightTag::kAttSocial: return att_social;
    case WeightTag::kAttItem: return att_item;
    case WeightTag::kAttRelation: return att_relation;
    case WeightTag::kRelSocial: return rel_social;
    case WeightTag::kRelItem: return rel_item;
    case WeightTag::kRelSelf: return rel_self;
  }
  throw std::invalid_argument("unknown weight tag");
}

std::span<const double> ModelWeights::tensor(WeightTag tag) const {
  return const_cast<ModelWeights*>(this)->tensor(tag);
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z;
  z.cfg = cfg;
  z.users = Matrix(users.rows(), users.cols());
  z.items = Matrix(items.rows(), items.cols());
  z.model = ModelWeights::zeros(cfg.d);
  return z;
}

ParameterSet init_parameters(std::size_t n_users, std::size_t n_items, const HyperConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.d == 0) throw std::invalid_argument("embedding size d must be positive");
  ParameterSet theta;
  theta.cfg = cfg;
  theta.users = Matrix(n_users, cfg.d);
  theta.items = Matrix(n_items, cfg.d);
  theta.model = ModelWeights::zeros(cfg.d);

  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::span<double> xs) {
    for (auto& x : xs) x = normal(engine);
  };
  fill(theta.users.flat());
  fill(theta.items.flat());
  for (auto tag : kAllWeightTags) fill(theta.model.tensor(tag));
  return theta;
}

double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }

Vec softmax(std::span<const double> scores) {
  Vec out(scores.size());
  if (scores.empty()) return out;
  const double mx = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

namespace {

AttentionTrace attend(const Matrix& w, std::span<const double> att,
                      std::span<const double> center, const Matrix& table,
                      std::span<const std::uint32_t> ids) {
  if (ids.empty()) throw std::invalid_argument("attention needs at least one neighbor");
  const std::size_t d = center.size();
  AttentionTrace t;
  t.center_mapped = linalg::matvec(w, center);
  const double center_term = linalg::dot(att.first(d), t.center_mapped);
  t.mapped.reserve(ids.size());
  t.pre_activation.reserve(ids.size());
  Vec scores;
  scores.reserve(ids.size());
  for (auto id : ids) {
    if (id >= table.rows()) throw std::out_of_range("neighbor id out of range");
    t.mapped.push_back(linalg::matvec(w, table.row(id)));
    const double pre = center_term + linalg::dot(att.subspan(d, d), t.mapped.back());
    t.pre_activation.push_back(pre);
    scores.push_back(leaky_relu(pre));
  }
  t.weights = softmax(scores);
  return t;
}

}  // namespace

AttentionTrace social_attention_trace(const ParameterSet& theta, UserId center,
                                      std::span<const UserId> neighbors) {
  return attend(theta.model.w_social, theta.model.att_social, theta.users.row(center),
                theta.users, neighbors);
}

AttentionTrace item_attention_trace(const ParameterSet& theta, UserId center,
                                    std::span<const ItemId> items) {
  const bool shared = theta.cfg.share_gat_layers;
  const Matrix& w = shared ? theta.model.w_social : theta.model.w_item;
  const Vec& att = shared ? theta.model.att_social : theta.model.att_item;
  return attend(w, att, theta.users.row(center), theta.items, items);
}

Vec social_attention(const ParameterSet& theta, UserId center, std::span<const UserId> neighbors) {
  return social_attention_trace(theta, center, neighbors).weights;
}

Vec item_attention(const ParameterSet& theta, UserId center, std::span<const ItemId> items) {
  return item_attention_trace(theta, center, items).weights;
}

namespace {

std::vector<ItemId> item_ids_of(const LocalGraph& g) {
  std::vector<ItemId> ids;
  ids.reserve(g.rated_items.size());
  for (const auto& [item, rating] : g.rated_items) ids.push_back(item);
  return ids;
}

double relation_score(std::span<const double> att, std::span<const double> h,
                      std::span<const double> rel) {
  const std::size_t d = h.size();
  return linalg::dot(att.first(d), h) + linalg::dot(att.subspan(d, d), rel);
}

}  // namespace

Aggregation aggregate(const ParameterSet& theta, const LocalGraph& graph,
                      std::span<const double> alpha, std::span<const double> beta) {
  const std::size_t d = theta.dim();
  const auto& m = theta.model;
  const auto center = theta.users.row(graph.owner);

  Aggregation agg;
  agg.has_social = !graph.social_neighbors.empty();
  agg.has_items = !graph.rated_items.empty();
  if (agg.has_social && alpha.size() != graph.social_neighbors.size())
    throw std::invalid_argument("alpha length does not match social neighbors");
  if (agg.has_items && beta.size() != graph.rated_items.size())
    throw std::invalid_argument("beta length does not match rated items");

  agg.h_social.assign(d, 0.0);
  agg.h_items.assign(d, 0.0);
  for (std::size_t p = 0; p < graph.social_neighbors.size(); ++p) {
    agg.hidden_social.push_back(linalg::matvec(m.w_hidden, theta.users.row(graph.social_neighbors[p])));
    linalg::axpy(alpha[p], agg.hidden_social.back(), agg.h_social);
  }
  for (std::size_t k = 0; k < graph.rated_items.size(); ++k) {
    agg.hidden_items.push_back(linalg::matvec(m.w_hidden, theta.items.row(graph.rated_items[k].first)));
    linalg::axpy(beta[k], agg.hidden_items.back(), agg.h_items);
  }

  // Branch order in the softmax: self, social, items.
  Vec scores;
  agg.score_self = relation_score(m.att_relation, center, m.rel_self);
  scores.push_back(agg.score_self);
  if (agg.has_social) {
    agg.score_social = relation_score(m.att_relation, agg.h_social, m.rel_social);
    scores.push_back(agg.score_social);
  }
  if (agg.has_items) {
    agg.score_items = relation_score(m.att_relation, agg.h_items, m.rel_item);
    scores.push_back(agg.score_items);
  }
  Vec gamma = theta.cfg.use_relation_vectors
                  ? softmax(scores)
                  : Vec(scores.size(), 1.0 / static_cast<double>(scores.size()));
  std::size_t slot = 0;
  agg.gamma_self = gamma[slot++];
  agg.gamma_social = agg.has_social ? gamma[slot++] : 0.0;
  agg.gamma_items = agg.has_items ? gamma[slot++] : 0.0;

  agg.user_embedding.assign(d, 0.0);
  linalg::axpy(agg.gamma_self, center, agg.user_embedding);
  if (agg.has_social) linalg::axpy(agg.gamma_social, agg.h_social, agg.user_embedding);
  if (agg.has_items) linalg::axpy(agg.gamma_items, agg.h_items, agg.user_embedding);
  return agg;
}

ForwardTrace forward(const ParameterSet& theta, const LocalGraph& graph) {
  if (graph.owner >= theta.n_users()) throw std::out_of_range("client id out of range");
  ForwardTrace t;
  t.owner = graph.owner;
  t.social = graph.social_neighbors;
  t.items = item_ids_of(graph);
  if (!t.social.empty()) t.social_att = social_attention_trace(theta, t.owner, t.social);
  if (!t.items.empty()) t.item_att = item_attention_trace(theta, t.owner, t.items);
  t.agg = aggregate(theta, graph, t.social_att.weights, t.item_att.weights);
  return t;
}

Vec predict(std::span<const double> user_embedding, std::span<const ItemId> items,
            const ParameterSet& theta) {
  Vec out;
  out.reserve(items.size());
  for (auto t : items) {
    if (t >= theta.n_items()) throw std::out_of_range("item id out of range");
    out.push_back(linalg::dot(user_embedding, theta.items.row(t)));
  }
  return out;
}

}  // namespace fesog
