#include "distlab/rng.hpp"

#include <cmath>

namespace distlab {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  k[0] += kWeyl0;
  k[1] += kWeyl1;
}

inline std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                 std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) philox_round(counter, key);
  return counter;
}

}  // namespace

Philox::Philox(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed),
      stream_(stream),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      block_pos_(4),
      spare_(0.0),
      has_spare_(false) {}

Philox Philox::split(std::uint64_t substream) const {
  // One Philox block keyed by the parent stream maps the substream id to a
  // fresh 64-bit stream id.
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_ ^ 0x5851F42Du),
                                            static_cast<std::uint32_t>((seed_ >> 32) ^ 0x4C957F2Du)};
  const auto out = philox_block(ctr, key);
  const std::uint64_t child = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  return Philox(seed_, child);
}

void Philox::refill() {
  block_ = philox_block(counter_, key_);
  block_pos_ = 0;
  if (++counter_[0] == 0) ++counter_[1];  // 64-bit in-stream counter
}

std::uint32_t Philox::next_u32() {
  if (block_pos_ >= 4) refill();
  return block_[block_pos_++];
}

std::uint64_t Philox::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Philox::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Philox::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double Philox::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 nudged away from 0 so the log is finite.
  const double u1 = next_double() + 0x1.0p-54;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Eigen::VectorXd Philox::normal_vector(int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = normal();
  return v;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  return Philox(seed).split(k).stream();
}

}  // namespace distlab

