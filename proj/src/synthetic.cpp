#include "fesog/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "fesog/rng.hpp"

namespace fesog {

namespace {
constexpr ItemId kUnseen = ~ItemId{0};
}  // namespace

DatasetBundle synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_users < 2 || spec.n_items < 1 || spec.communities < 1 || spec.factors < 1)
    throw std::invalid_argument("synthetic dataset needs >= 2 users, >= 1 item, community and factor");
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = spec.factors;
  const double norm = 1.0 / std::sqrt(static_cast<double>(k));

  auto draw = [&](double sd) {
    std::vector<double> v(k);
    for (double& x : v) x = sd * norm * normal(rng);
    return v;
  };
  std::vector<std::vector<double>> centers(spec.communities);
  for (auto& c : centers) c = draw(1.0);

  DatasetBundle b;
  b.n_users = spec.n_users;
  b.scale = spec.scale;
  std::vector<std::size_t> community(spec.n_users);
  std::vector<std::vector<double>> users(spec.n_users);
  std::uniform_int_distribution<std::size_t> pick_community(0, spec.communities - 1);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    community[u] = pick_community(rng);
    users[u] = draw(0.4);
    for (std::size_t f = 0; f < k; ++f) users[u][f] += centers[community[u]][f];
    b.user_ids.push_back("u" + std::to_string(u));
  }
  std::vector<std::vector<double>> items(spec.n_items);
  for (auto& v : items) v = draw(1.0);

  const double mid = 0.5 * (spec.scale.min + spec.scale.max);
  const std::size_t lo = std::max<std::size_t>(1, spec.ratings_per_user / 2);
  const std::size_t hi = std::max(lo, spec.ratings_per_user + spec.ratings_per_user / 2);
  std::uniform_int_distribution<std::size_t> count(lo, hi);
  std::vector<ItemId> pool(spec.n_items);
  for (std::size_t i = 0; i < spec.n_items; ++i) pool[i] = static_cast<ItemId>(i);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::size_t n = std::min(count(rng), spec.n_items);
    for (std::size_t j = 0; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, spec.n_items - 1);
      std::swap(pool[j], pool[pick(rng)]);
    }
    std::vector<ItemId> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(chosen.begin(), chosen.end());
    for (ItemId i : chosen) {
      double affinity = 0.0;
      for (std::size_t f = 0; f < k; ++f) affinity += users[u][f] * items[i][f];
      const double raw = mid + spec.taste_spread * affinity + spec.rating_noise * normal(rng);
      const double r = std::clamp(std::floor(raw + 0.5), static_cast<double>(spec.scale.min),
                                  static_cast<double>(spec.scale.max));
      b.ratings.push_back({static_cast<UserId>(u), i, r});
    }
  }

  // Item ids follow first appearance so that a written and reloaded copy
  // indexes identically; never-rated items are dropped.
  std::vector<ItemId> relabel(spec.n_items, kUnseen);
  for (auto& r : b.ratings) {
    if (relabel[r.item] == kUnseen) {
      relabel[r.item] = static_cast<ItemId>(b.item_ids.size());
      b.item_ids.push_back("i" + std::to_string(b.item_ids.size()));
    }
    r.item = relabel[r.item];
  }
  b.n_items = b.item_ids.size();

  std::vector<std::vector<UserId>> members(spec.communities);
  for (std::size_t u = 0; u < spec.n_users; ++u) members[community[u]].push_back(static_cast<UserId>(u));
  std::set<std::pair<UserId, UserId>> seen;
  std::bernoulli_distribution stay(spec.in_community);
  std::uniform_int_distribution<std::size_t> any_user(0, spec.n_users - 1);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const auto& group = members[community[u]];
    for (std::size_t l = 0; l < spec.links_per_user; ++l) {
      UserId v;
      if (group.size() > 1 && stay(rng)) {
        std::uniform_int_distribution<std::size_t> in(0, group.size() - 1);
        v = group[in(rng)];
      } else {
        v = static_cast<UserId>(any_user(rng));
      }
      if (v == u || !seen.emplace(static_cast<UserId>(u), v).second) continue;
      b.social.push_back({static_cast<UserId>(u), v});
    }
  }
  return b;
}

void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& ratings,
                   const std::filesystem::path& trust) {
  std::ofstream r(ratings);
  std::ofstream t(trust);
  if (!r || !t) throw std::runtime_error("cannot write dataset files");
  for (const auto& x : bundle.ratings)
    r << bundle.user_ids[x.user] << ' ' << bundle.item_ids[x.item] << ' ' << x.rating << '\n';
  for (const auto& e : bundle.social)
    t << bundle.user_ids[e.a] << ' ' << bundle.user_ids[e.b] << '\n';
}

}  // namespace fesog
