#include "fesog/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fesog/kv.hpp"

namespace fesog {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string> fields_of(const std::string& line) {
  if (line.find(',') != std::string::npos) return split_list(line, ',');
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

class IdIndex {
 public:
  std::uint32_t get(const std::string& ext, std::vector<std::string>& names) {
    auto [it, inserted] = index_.try_emplace(ext, static_cast<std::uint32_t>(names.size()));
    if (inserted) names.push_back(ext);
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct PairHash {
  std::size_t operator()(const std::pair<std::uint32_t, std::uint32_t>& p) const {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32) | p.second);
  }
};

}  // namespace

DatasetBundle load_dataset(std::istream& ratings, std::istream& trust, RatingScale scale,
                           double rating_factor) {
  if (scale.min > scale.max) throw ValidationError("rating scale min exceeds max");
  DatasetBundle bundle;
  bundle.scale = scale;
  IdIndex users;
  IdIndex items;
  std::unordered_map<std::pair<std::uint32_t, std::uint32_t>, std::size_t, PairHash> seen;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ratings, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = fields_of(t);
    if (f.size() < 3) throw ParseError("ratings", lineno, "expected `user item rating`");
    double r = 0.0;
    if (!parse_double(f[2], r)) throw ParseError("ratings", lineno, "bad rating '" + f[2] + "'");
    r *= rating_factor;
    if (!scale.contains(r)) {
      std::ostringstream msg;
      msg << "ratings:" << lineno << ": rating " << r << " outside [" << scale.min << ", "
          << scale.max << "]";
      throw ValidationError(msg.str());
    }
    const auto u = users.get(f[0], bundle.user_ids);
    const auto i = items.get(f[1], bundle.item_ids);
    auto [it, inserted] = seen.try_emplace({u, i}, bundle.ratings.size());
    if (inserted) {
      bundle.ratings.push_back({u, i, r});
    } else {
      bundle.ratings[it->second].rating = r;  // last occurrence wins
    }
  }

  std::set<std::pair<UserId, UserId>> edges;
  lineno = 0;
  while (std::getline(trust, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = fields_of(t);
    if (f.size() < 2) throw ParseError("trust", lineno, "expected `user_a user_b`");
    if (f.size() >= 3) {
      double w = 0.0;
      if (!parse_double(f[2], w)) throw ParseError("trust", lineno, "bad weight '" + f[2] + "'");
      if (w == 0.0) continue;
    }
    const auto a = users.get(f[0], bundle.user_ids);
    const auto b = users.get(f[1], bundle.user_ids);
    if (a == b) continue;
    if (edges.insert({a, b}).second) bundle.social.push_back({a, b});
  }

  bundle.n_users = bundle.user_ids.size();
  bundle.n_items = bundle.item_ids.size();
  return bundle;
}

DatasetBundle load_dataset(const std::filesystem::path& ratings_path,
                           const std::filesystem::path& trust_path, RatingScale scale,
                           double rating_factor) {
  std::ifstream r(ratings_path);
  if (!r) throw std::runtime_error("cannot open ratings file " + ratings_path.string());
  std::ifstream t(trust_path);
  if (!t) throw std::runtime_error("cannot open trust file " + trust_path.string());
  return load_dataset(r, t, scale, rating_factor);
}

DatasetBundle split_dataset(const DatasetBundle& bundle, std::uint64_t seed) {
  DatasetBundle out = bundle;
  out.train.clear();
  out.valid.clear();
  out.test.clear();

  const std::size_t n = bundle.ratings.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(seed);
  std::shuffle(order.begin(), order.end(), engine);

  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = bundle.ratings[order[k]];
    if (k < n_train) {
      out.train.push_back(r);
    } else if (k < n_train + n_valid) {
      out.valid.push_back(r);
    } else {
      out.test.push_back(r);
    }
  }
  return out;
}

std::vector<LocalGraph> build_local_graphs(const DatasetBundle& bundle) {
  std::vector<LocalGraph> graphs(bundle.n_users);
  for (std::size_t n = 0; n < graphs.size(); ++n) graphs[n].owner = static_cast<UserId>(n);
  for (const auto& r : bundle.train) graphs.at(r.user).rated_items.emplace_back(r.item, r.rating);

  std::vector<std::vector<UserId>> adj(bundle.n_users);
  for (const auto& e : bundle.social) {
    adj.at(e.a).push_back(e.b);
    adj.at(e.b).push_back(e.a);
  }
  for (std::size_t n = 0; n < adj.size(); ++n) {
    auto& nb = adj[n];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    graphs[n].social_neighbors = std::move(nb);
  }
  return graphs;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  DatasetManifest m;
  const auto base = path.parent_path();
  bool have_ratings = false;
  bool have_trust = false;
  for (const auto& e : parse_kv_file(path)) {
    try {
      if (e.key == "name") {
        m.name = e.value;
      } else if (e.key == "ratings") {
        m.ratings = base / e.value;
        have_ratings = true;
      } else if (e.key == "trust") {
        m.trust = base / e.value;
        have_trust = true;
      } else if (e.key == "rating_min") {
        m.scale.min = std::stoi(e.value);
      } else if (e.key == "rating_max") {
        m.scale.max = std::stoi(e.value);
      } else if (e.key == "rating_factor") {
        m.rating_factor = std::stod(e.value);
      } else {
        throw ParseError(path.string(), e.line, "unknown key '" + e.key + "'");
      }
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), e.line, "bad value for '" + e.key + "'");
    }
  }
  if (!have_ratings || !have_trust) {
    throw ValidationError(path.string() + ": manifest must declare both ratings and trust");
  }
  return m;
}

DatasetBundle load_dataset(const DatasetManifest& manifest) {
  return load_dataset(manifest.ratings, manifest.trust, manifest.scale, manifest.rating_factor);
}

}  // namespace fesog
