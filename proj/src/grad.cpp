#include "fesog/grad.hpp"

#include <cmath>
#include <stdexcept>

namespace fesog {

std::optional<LossValue> local_loss(const ForwardTrace& trace, const ParameterSet& theta,
                                    const LossInputs& inputs) {
  const double denom = inputs.denominator == LossDenominator::kReal
                           ? static_cast<double>(inputs.real.size())
                           : static_cast<double>(inputs.real.size() + inputs.pseudo.size());
  if (inputs.real.empty() && inputs.pseudo.empty()) return std::nullopt;
  if (denom == 0.0) return std::nullopt;

  LossValue lv;
  lv.denominator = denom;
  lv.residuals.reserve(inputs.real.size() + inputs.pseudo.size());
  double sum_sq = 0.0;
  auto add_terms = [&](const std::vector<std::pair<ItemId, double>>& terms) {
    for (const auto& [item, target] : terms) {
      if (item >= theta.n_items()) throw std::out_of_range("item id out of range");
      const double r = target - linalg::dot(trace.user_embedding(), theta.items.row(item));
      lv.residuals.emplace_back(item, r);
      sum_sq += r * r;
    }
  };
  add_terms(inputs.real);
  add_terms(inputs.pseudo);
  lv.value = std::sqrt(sum_sq / denom + kLossEpsilon);
  return lv;
}

namespace {

Vec& slot(std::map<std::uint32_t, Vec>& m, std::uint32_t id, std::size_t d) {
  auto [it, inserted] = m.try_emplace(id);
  if (inserted) it->second.assign(d, 0.0);
  return it->second;
}

// Backpropagates d(loss)/d(weights) through one attention layer into the
// mapping matrix, the attention vector, the center and the neighbor rows.
void attention_backward(const AttentionTrace& t, std::span<const double> d_weights,
                        const Matrix& w, std::span<const double> att,
                        std::span<const double> center, const Matrix& table,
                        std::span<const std::uint32_t> ids, Matrix& d_w, std::span<double> d_att,
                        std::span<double> d_center, std::map<std::uint32_t, Vec>& d_table) {
  const std::size_t d = center.size();
  const std::size_t n = ids.size();
  double mix = 0.0;
  for (std::size_t i = 0; i < n; ++i) mix += t.weights[i] * d_weights[i];

  Vec d_center_mapped(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d_score = t.weights[i] * (d_weights[i] - mix);
    const double d_pre = d_score * (t.pre_activation[i] > 0.0 ? 1.0 : kLeakySlope);
    if (d_pre == 0.0) continue;
    // pre = att[:d] . W e_c + att[d:] . W e_i
    linalg::axpy(d_pre, t.center_mapped, d_att.first(d));
    linalg::axpy(d_pre, t.mapped[i], d_att.subspan(d, d));
    linalg::axpy(d_pre, att.first(d), d_center_mapped);
    Vec d_mapped(d, 0.0);
    linalg::axpy(d_pre, att.subspan(d, d), d_mapped);
    const auto row = table.row(ids[i]);
    linalg::outer_acc(d_w, d_mapped, row);
    linalg::matTvec_acc(w, d_mapped, slot(d_table, ids[i], d));
  }
  linalg::outer_acc(d_w, d_center_mapped, center);
  linalg::matTvec_acc(w, d_center_mapped, d_center);
}

// Hidden mapping part of aggregation: h = sum_i weight_i W_h e_i.
void hidden_backward(std::span<const double> d_h, std::span<const double> weights,
                     const std::vector<Vec>& hidden, const Matrix& w_hidden,
                     const Matrix& table, std::span<const std::uint32_t> ids, Matrix& d_w_hidden,
                     Vec& d_weights, std::map<std::uint32_t, Vec>& d_table) {
  const std::size_t d = d_h.size();
  d_weights.assign(ids.size(), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    d_weights[i] = linalg::dot(d_h, hidden[i]);
    Vec d_mapped(d_h.begin(), d_h.end());
    for (auto& v : d_mapped) v *= weights[i];
    linalg::outer_acc(d_w_hidden, d_mapped, table.row(ids[i]));
    linalg::matTvec_acc(w_hidden, d_mapped, slot(d_table, ids[i], d));
  }
}

}  // namespace

GradientPacket backward(const ParameterSet& theta, const LocalGraph& graph,
                        const ForwardTrace& trace, const LossInputs& inputs,
                        const LossValue& loss) {
  const std::size_t d = theta.dim();
  const auto& m = theta.model;
  const auto& agg = trace.agg;
  const auto center = theta.users.row(trace.owner);

  GradientPacket pkt;
  pkt.owner = trace.owner;
  pkt.model_grads = ModelWeights::zeros(d);
  pkt.interaction_count = static_cast<double>(inputs.real.size() + inputs.pseudo.size());
  auto& g = pkt.model_grads;

  // Every touched entity is present, even with a zero gradient.
  slot(pkt.user_grads, trace.owner, d);
  for (auto u : trace.social) slot(pkt.user_grads, u, d);
  for (auto t : trace.items) slot(pkt.item_grads, t, d);
  for (const auto& [t, r] : inputs.real) slot(pkt.item_grads, t, d);
  for (const auto& [t, r] : inputs.pseudo) slot(pkt.item_grads, t, d);

  for (const auto& [t, r] : inputs.real) pkt.item_counts[t] += 1.0;
  for (const auto& [t, r] : inputs.pseudo) pkt.item_counts[t] += 1.0;
  for (auto t : trace.items) pkt.item_counts[t] += 1.0;
  pkt.user_counts[trace.owner] += pkt.interaction_count;
  for (auto u : trace.social) pkt.user_counts[u] += pkt.interaction_count;

  // Prediction layer: L = sqrt(S / D + eps), S = sum (y - e* . e_t)^2.
  const auto estar = trace.user_embedding();
  Vec d_estar(d, 0.0);
  for (const auto& [t, r] : loss.residuals) {
    const double d_pred = -r / (loss.denominator * loss.value);
    linalg::axpy(d_pred, theta.items.row(t), d_estar);
    linalg::axpy(d_pred, estar, pkt.item_grads[t]);
  }

  // e* = g_self e_u + g_social h_u + g_items h_t
  Vec d_center(d, 0.0);
  linalg::axpy(agg.gamma_self, d_estar, d_center);
  Vec d_h_social(d, 0.0);
  Vec d_h_items(d, 0.0);
  if (agg.has_social) linalg::axpy(agg.gamma_social, d_estar, d_h_social);
  if (agg.has_items) linalg::axpy(agg.gamma_items, d_estar, d_h_items);

  if (theta.cfg.use_relation_vectors) {
    const double dg_self = linalg::dot(d_estar, center);
    const double dg_social = agg.has_social ? linalg::dot(d_estar, agg.h_social) : 0.0;
    const double dg_items = agg.has_items ? linalg::dot(d_estar, agg.h_items) : 0.0;
    const double mix = agg.gamma_self * dg_self + agg.gamma_social * dg_social +
                       agg.gamma_items * dg_items;
    const auto c_hidden = std::span<const double>(m.att_relation).first(d);
    const auto c_rel = std::span<const double>(m.att_relation).subspan(d, d);
    auto dc = std::span<double>(g.att_relation);
    auto branch = [&](double gamma, double dg, std::span<const double> h,
                      std::span<const double> rel, std::span<double> d_h, std::span<double> d_rel) {
      const double ds = gamma * (dg - mix);
      linalg::axpy(ds, h, dc.first(d));
      linalg::axpy(ds, rel, dc.subspan(d, d));
      linalg::axpy(ds, c_hidden, d_h);
      linalg::axpy(ds, c_rel, d_rel);
    };
    branch(agg.gamma_self, dg_self, center, m.rel_self, d_center, g.rel_self);
    if (agg.has_social)
      branch(agg.gamma_social, dg_social, agg.h_social, m.rel_social, d_h_social, g.rel_social);
    if (agg.has_items)
      branch(agg.gamma_items, dg_items, agg.h_items, m.rel_item, d_h_items, g.rel_item);
  }

  std::map<std::uint32_t, Vec>& d_users = pkt.user_grads;
  std::map<std::uint32_t, Vec>& d_items = pkt.item_grads;

  if (agg.has_social) {
    Vec d_alpha;
    hidden_backward(d_h_social, trace.social_att.weights, agg.hidden_social, m.w_hidden,
                    theta.users, trace.social, g.w_hidden, d_alpha, d_users);
    attention_backward(trace.social_att, d_alpha, m.w_social, m.att_social, center, theta.users,
                       trace.social, g.w_social, g.att_social, d_center, d_users);
  }
  if (agg.has_items) {
    Vec d_beta;
    hidden_backward(d_h_items, trace.item_att.weights, agg.hidden_items, m.w_hidden,
                    theta.items, trace.items, g.w_hidden, d_beta, d_items);
    const bool shared = theta.cfg.share_gat_layers;
    attention_backward(trace.item_att, d_beta, shared ? m.w_social : m.w_item,
                       shared ? m.att_social : m.att_item, center, theta.items, trace.items,
                       shared ? g.w_social : g.w_item, shared ? g.att_social : g.att_item,
                       d_center, d_items);
  }

  linalg::axpy(1.0, d_center, d_users[trace.owner]);
  (void)graph;
  return pkt;
}

double loss_at(const ParameterSet& theta, const LocalGraph& graph, const LossInputs& inputs) {
  const auto trace = forward(theta, graph);
  const auto lv = local_loss(trace, theta, inputs);
  return lv ? lv->value : 0.0;
}

Vec central_difference(const std::function<double(std::span<const double>)>& f, Vec x,
                       double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Vec grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParameterSet finite_difference_oracle(const ParameterSet& theta, const LocalGraph& graph,
                                      const LossInputs& inputs, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  ParameterSet work = theta;
  ParameterSet grad = theta.zeros_like();
  auto sweep = [&](std::span<double> xs, std::span<double> out) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double orig = xs[i];
      xs[i] = orig + h;
      const double up = loss_at(work, graph, inputs);
      xs[i] = orig - h;
      const double down = loss_at(work, graph, inputs);
      xs[i] = orig;
      out[i] = (up - down) / (2.0 * h);
    }
  };
  sweep(work.users.flat(), grad.users.flat());
  sweep(work.items.flat(), grad.items.flat());
  for (auto tag : kAllWeightTags) sweep(work.model.tensor(tag), grad.model.tensor(tag));
  return grad;
}

ParameterSet densify(const GradientPacket& packet, const ParameterSet& like) {
  ParameterSet dense = like.zeros_like();
  for (const auto& [u, v] : packet.user_grads) std::copy(v.begin(), v.end(), dense.users.row(u).begin());
  for (const auto& [t, v] : packet.item_grads) std::copy(v.begin(), v.end(), dense.items.row(t).begin());
  dense.model = packet.model_grads;
  return dense;
}

}  // namespace fesog
