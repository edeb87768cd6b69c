#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fesog {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct RatingScale {
  int min = 1;
  int max = 5;

  bool contains(double r) const { return r >= min && r <= max; }
  bool operator==(const RatingScale&) const = default;
};

struct RatingTriple {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;

  bool operator==(const RatingTriple&) const = default;
};

struct SocialEdge {
  UserId a = 0;
  UserId b = 0;

  bool operator==(const SocialEdge&) const = default;
};

/// Ratings and trust links re-indexed to dense ids. Before split_dataset only
/// `ratings` is populated; afterwards `train`, `valid` and `test` partition it.
struct DatasetBundle {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  RatingScale scale;
  std::vector<RatingTriple> ratings;
  std::vector<RatingTriple> train;
  std::vector<RatingTriple> valid;
  std::vector<RatingTriple> test;
  std::vector<SocialEdge> social;
  // External id of each dense index, in first-seen order.
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  bool is_split() const { return !train.empty() || !valid.empty() || !test.empty(); }
};

/// One client's private star graph.
struct LocalGraph {
  UserId owner = 0;
  std::vector<std::pair<ItemId, double>> rated_items;
  std::vector<UserId> social_neighbors;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses rating lines `user item rating [...]` and trust lines
/// `user_a user_b [weight]`. Fields are comma- or whitespace-separated,
/// detected per line; blank lines and lines starting with '#' are skipped.
/// Ratings are multiplied by `rating_factor` before validation against
/// `scale`. A trust line with weight 0 is dropped, as are self-loops and
/// repeated directed pairs.
DatasetBundle load_dataset(std::istream& ratings, std::istream& trust, RatingScale scale,
                           double rating_factor = 1.0);
DatasetBundle load_dataset(const std::filesystem::path& ratings_path,
                           const std::filesystem::path& trust_path, RatingScale scale,
                           double rating_factor = 1.0);

/// Shuffles the global rating list with a std::mt19937_64 seeded by `seed`
/// and cuts it 60/20/20.
DatasetBundle split_dataset(const DatasetBundle& bundle, std::uint64_t seed);

/// One graph per user. Trust edges are treated as undirected; neighbor lists
/// are sorted ascending.
std::vector<LocalGraph> build_local_graphs(const DatasetBundle& bundle);

/// key=value description of a dataset on disk. Paths are resolved relative to
/// the manifest's directory.
///
///   name = filmtrust
///   ratings = ratings.txt
///   trust = trust.txt
///   rating_min = 1
///   rating_max = 8
///   rating_factor = 2
struct DatasetManifest {
  std::string name;
  std::filesystem::path ratings;
  std::filesystem::path trust;
  RatingScale scale;
  double rating_factor = 1.0;

  static DatasetManifest load(const std::filesystem::path& path);
};

DatasetBundle load_dataset(const DatasetManifest& manifest);

}  // namespace fesog
