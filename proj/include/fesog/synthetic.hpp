#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "fesog/data.hpp"

namespace fesog {

/// Shape of a generated social rating dataset. Users belong to communities
/// that share taste; trust links are drawn mostly within a community, so
/// social neighbors carry signal about a user's ratings.
struct SyntheticSpec {
  std::size_t n_users = 200;
  std::size_t n_items = 300;
  std::size_t ratings_per_user = 20;  // mean; actual counts vary by +-50%
  std::size_t links_per_user = 4;
  std::size_t communities = 5;
  std::size_t factors = 4;
  double taste_spread = 1.5;   // rating units per unit of latent affinity
  double rating_noise = 0.5;   // sd of Gaussian noise before rounding
  double in_community = 0.8;   // probability a link stays in the community
  RatingScale scale{1, 5};
};

/// Unsplit bundle with external ids "u<k>" / "i<k>" in index order. Every
/// user rates at least one item; items nobody rated are not included.
DatasetBundle synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

/// Writes `user item rating` and `user_a user_b` lines that load_dataset
/// reads back into an identical bundle.
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& ratings,
                   const std::filesystem::path& trust);

}  // namespace fesog
