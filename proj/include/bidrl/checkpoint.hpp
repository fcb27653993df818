#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/json_io.hpp"
#include "bidrl/network.hpp"

namespace bidrl {

// On-disk layout (little endian):
//   8 bytes   magic "BIDRLCKP"
//   u32       format version
//   u32       header length H
//   H bytes   JSON header: network config, observation layout, metadata
//   u64       parameter count N
//   N * f32   flattened parameters
//   u32       CRC-32 of header and parameter bytes
inline constexpr std::array<char, 8> kCheckpointMagic{'B', 'I', 'D', 'R', 'L', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Checkpoint {
  NetworkConfig network;
  ObservationLayout layout;
  Json metadata = Json::object();  // mode, env steps, iteration, ...
  std::vector<float> params;

  ActorCritic<float> model() const {
    ActorCritic<float> net(network, layout);
    if (params.size() != net.parameter_count()) {
      throw LayoutMismatch("checkpoint holds " + std::to_string(params.size()) + " parameters, network needs " +
                           std::to_string(net.parameter_count()));
    }
    std::memcpy(net.params().data(), params.data(), params.size() * sizeof(float));
    return net;
  }

  static Checkpoint from_model(const ActorCritic<float>& net, Json metadata = Json::object()) {
    Checkpoint c;
    c.network = net.config();
    c.layout = net.layout();
    c.metadata = std::move(metadata);
    c.params.assign(net.params().data(), net.params().data() + net.params().size());
    return c;
  }
};

namespace detail {

template <class T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

inline std::uint32_t crc(const char* data, std::size_t n, std::uint32_t seed = 0) {
  uLong c = seed;
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace detail

inline std::string serialize(const Checkpoint& ckpt) {
  const std::string header =
      Json{{"network", to_json(ckpt.network)}, {"layout", to_json(ckpt.layout)}, {"metadata", ckpt.metadata}}
          .dump();
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  detail::put<std::uint64_t>(out, ckpt.params.size());
  const char* raw = reinterpret_cast<const char*>(ckpt.params.data());
  out.append(raw, ckpt.params.size() * sizeof(float));
  std::uint32_t sum = detail::crc(header.data(), header.size());
  sum = detail::crc(raw, ckpt.params.size() * sizeof(float), sum);
  detail::put<std::uint32_t>(out, sum);
  return out;
}

inline Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = detail::take<std::uint32_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw CheckpointError("checkpoint truncated");
  const std::string header = bytes.substr(pos, header_len);
  pos += header_len;
  const auto count = detail::take<std::uint64_t>(bytes, pos);
  if (count > (bytes.size() - pos) / sizeof(float)) throw CheckpointError("checkpoint truncated");
  Checkpoint ckpt;
  ckpt.params.resize(count);
  std::memcpy(ckpt.params.data(), bytes.data() + pos, count * sizeof(float));
  const char* raw = bytes.data() + pos;
  pos += count * sizeof(float);
  const auto stored = detail::take<std::uint32_t>(bytes, pos);
  std::uint32_t sum = detail::crc(header.data(), header.size());
  sum = detail::crc(raw, count * sizeof(float), sum);
  if (sum != stored) throw CheckpointError("checkpoint checksum mismatch");
  if (pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint");

  Json h;
  try {
    h = Json::parse(header);
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  from_json(h.at("network"), ckpt.network, "network");
  from_json(h.at("layout"), ckpt.layout, "layout");
  ckpt.metadata = h.value("metadata", Json::object());
  if (count != parameter_count(ckpt.network, ckpt.layout)) {
    throw LayoutMismatch("checkpoint parameter count does not match its network description");
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

// Throws unless `ckpt` can drive a policy with the given observation layout
// and bid range.
inline void check_compatible(const Checkpoint& ckpt, const ObservationLayout& layout, int bid_levels) {
  if (ckpt.layout.self_dim != layout.self_dim || ckpt.layout.block_dim != layout.block_dim) {
    throw LayoutMismatch("checkpoint observation layout differs from the environment");
  }
  if (!ckpt.network.use_attention_pooling && ckpt.layout.fixed_blocks != layout.fixed_blocks) {
    throw LayoutMismatch("checkpoint without attention pooling was built for " +
                         std::to_string(ckpt.layout.fixed_blocks) + " competitor blocks, environment provides " +
                         std::to_string(layout.fixed_blocks));
  }
  if (ckpt.network.bid_levels != bid_levels) {
    throw LayoutMismatch("checkpoint has " + std::to_string(ckpt.network.bid_levels) +
                         " bid levels, auction needs " + std::to_string(bid_levels));
  }
}

}  // namespace bidrl
