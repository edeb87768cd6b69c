#include "fesog/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "bytes.hpp"

namespace fesog {

namespace {

constexpr char kMagic[8] = {'F', 'E', 'S', 'O', 'G', 'C', 'K', 'P'};

void put_tensor(std::ostream& out, std::string_view name, std::size_t rows, std::size_t cols,
                std::span<const double> xs) {
  bytes::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  bytes::put<std::uint64_t>(out, rows);
  bytes::put<std::uint64_t>(out, cols);
  for (double x : xs) bytes::put_f64(out, x);
}

void get_tensor(std::istream& in, std::string_view expected, std::size_t rows, std::size_t cols,
                std::span<double> dst) {
  const auto len = bytes::get<std::uint16_t>(in);
  std::string name(len, '\0');
  if (!in.read(name.data(), len)) throw std::runtime_error("truncated checkpoint");
  if (name != expected) throw std::runtime_error("checkpoint: expected tensor " + std::string(expected) + ", got " + name);
  const auto r = bytes::get<std::uint64_t>(in);
  const auto c = bytes::get<std::uint64_t>(in);
  if (r != rows || c != cols) throw std::runtime_error("checkpoint: bad shape for " + name);
  for (auto& x : dst) x = bytes::get_f64(in);
}

std::pair<std::size_t, std::size_t> weight_shape(WeightTag tag, std::size_t d) {
  switch (tag) {
    case WeightTag::kWSocial:
    case WeightTag::kWItem:
    case WeightTag::kWHidden: return {d, d};
    case WeightTag::kAttSocial:
    case WeightTag::kAttItem:
    case WeightTag::kAttRelation: return {1, 2 * d};
    default: return {1, d};
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params, std::uint64_t round) {
  const std::size_t d = params.dim();
  out.write(kMagic, sizeof(kMagic));
  bytes::put<std::uint32_t>(out, kCheckpointVersion);
  bytes::put<std::uint64_t>(out, round);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  bytes::put<std::uint8_t>(out, params.cfg.share_gat_layers ? 1 : 0);
  bytes::put<std::uint8_t>(out, params.cfg.use_relation_vectors ? 1 : 0);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(2 + kNumWeightTags));
  put_tensor(out, "user_embedding", params.users.rows(), d, params.users.flat());
  put_tensor(out, "item_embedding", params.items.rows(), d, params.items.flat());
  for (auto tag : kAllWeightTags) {
    const auto [r, c] = weight_shape(tag, d);
    put_tensor(out, weight_name(tag), r, c, params.model.tensor(tag));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::string_view(magic, 8) != std::string_view(kMagic, 8))
    throw std::runtime_error("not a checkpoint (bad magic)");
  const auto version = bytes::get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.round = bytes::get<std::uint64_t>(in);
  auto& p = ck.params;
  p.cfg.d = bytes::get<std::uint32_t>(in);
  p.cfg.share_gat_layers = bytes::get<std::uint8_t>(in) != 0;
  p.cfg.use_relation_vectors = bytes::get<std::uint8_t>(in) != 0;
  if (bytes::get<std::uint32_t>(in) != 2 + kNumWeightTags)
    throw std::runtime_error("checkpoint: unexpected tensor count");
  const std::size_t d = p.cfg.d;

  // Embedding tables carry their row count in the header of the tensor.
  auto read_table = [&](std::string_view name) {
    const auto pos = in.tellg();
    const auto len = bytes::get<std::uint16_t>(in);
    in.ignore(len);
    const auto rows = bytes::get<std::uint64_t>(in);
    in.seekg(pos);
    Matrix m(rows, d);
    get_tensor(in, name, rows, d, m.flat());
    return m;
  };
  p.users = read_table("user_embedding");
  p.items = read_table("item_embedding");
  p.model = ModelWeights::zeros(d);
  for (auto tag : kAllWeightTags) {
    const auto [r, c] = weight_shape(tag, d);
    get_tensor(in, weight_name(tag), r, c, p.model.tensor(tag));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     std::uint64_t round) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(out, params, round);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace fesog
