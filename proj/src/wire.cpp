#include "fesog/wire.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "bytes.hpp"

namespace fesog {

namespace {

void put_tensor(std::ostream& out, TensorKind kind, std::uint32_t id, std::span<const double> xs) {
  bytes::put<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  bytes::put<std::uint32_t>(out, id);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(xs.size()));
  for (double x : xs) bytes::put_f64(out, x);
}

}  // namespace

void write_message(std::ostream& out, const ClientMessage& msg) {
  const auto& p = msg.packet;
  const std::size_t count = kNumWeightTags + p.item_grads.size() + p.user_grads.size() +
                            p.item_counts.size() + p.user_counts.size();
  bytes::put<std::uint32_t>(out, kPacketMagic);
  bytes::put<std::uint64_t>(out, msg.round);
  bytes::put<std::uint32_t>(out, p.owner);
  bytes::put_f64(out, p.interaction_count);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  for (auto tag : kAllWeightTags)
    put_tensor(out, TensorKind::kModelWeight, static_cast<std::uint32_t>(tag),
               p.model_grads.tensor(tag));
  for (const auto& [id, v] : p.item_grads) put_tensor(out, TensorKind::kItemGrad, id, v);
  for (const auto& [id, v] : p.user_grads) put_tensor(out, TensorKind::kUserGrad, id, v);
  for (const auto& [id, c] : p.item_counts)
    put_tensor(out, TensorKind::kItemCount, id, std::span<const double>(&c, 1));
  for (const auto& [id, c] : p.user_counts)
    put_tensor(out, TensorKind::kUserCount, id, std::span<const double>(&c, 1));
}

ClientMessage read_message(std::istream& in) {
  if (bytes::get<std::uint32_t>(in) != kPacketMagic) throw std::runtime_error("bad packet magic");
  ClientMessage msg;
  msg.round = bytes::get<std::uint64_t>(in);
  auto& p = msg.packet;
  p.owner = bytes::get<std::uint32_t>(in);
  p.interaction_count = bytes::get_f64(in);
  const auto count = bytes::get<std::uint32_t>(in);

  std::size_t d = 0;
  bool have_model = false;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto kind = static_cast<TensorKind>(bytes::get<std::uint8_t>(in));
    const auto id = bytes::get<std::uint32_t>(in);
    const auto len = bytes::get<std::uint32_t>(in);
    Vec xs;
    xs.reserve(std::min<std::size_t>(len, 1u << 16));  // len is untrusted
    for (std::uint32_t i = 0; i < len; ++i) xs.push_back(bytes::get_f64(in));
    switch (kind) {
      case TensorKind::kModelWeight: {
        if (id >= kNumWeightTags) throw std::runtime_error("bad weight tag");
        const auto tag = static_cast<WeightTag>(id);
        if (!have_model) {
          // rel_* vectors have length d; the first tensor is w_social (d*d).
          if (tag != WeightTag::kWSocial) throw std::runtime_error("model weights out of order");
          std::size_t side = 0;
          while (side * side < len) ++side;
          if (side * side != len) throw std::runtime_error("w_social is not square");
          d = side;
          p.model_grads = ModelWeights::zeros(d);
          have_model = true;
        }
        auto dst = p.model_grads.tensor(tag);
        if (dst.size() != len) throw std::runtime_error("weight length mismatch");
        std::copy(xs.begin(), xs.end(), dst.begin());
        break;
      }
      case TensorKind::kItemGrad: p.item_grads[id] = std::move(xs); break;
      case TensorKind::kUserGrad: p.user_grads[id] = std::move(xs); break;
      case TensorKind::kItemCount:
        if (len != 1) throw std::runtime_error("count tensor must have length 1");
        p.item_counts[id] = xs[0];
        break;
      case TensorKind::kUserCount:
        if (len != 1) throw std::runtime_error("count tensor must have length 1");
        p.user_counts[id] = xs[0];
        break;
      default: throw std::runtime_error("unknown tensor kind");
    }
  }
  return msg;
}

std::string encode_message(const ClientMessage& msg) {
  std::ostringstream out(std::ios::binary);
  write_message(out, msg);
  return out.str();
}

ClientMessage decode_message(const std::string& data) {
  std::istringstream in(data, std::ios::binary);
  return read_message(in);
}

}  // namespace fesog
