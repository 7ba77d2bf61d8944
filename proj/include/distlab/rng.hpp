// Counter-based PRNG (Philox4x32-10). Every stochastic operation in the
// library takes an explicit seed; independent substreams come from split().
#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace distlab {

class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent stream derived from (seed, stream, substream). Children with
  // distinct substream ids never overlap the parent or each other.
  Philox split(std::uint64_t substream) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  double next_double();                  // uniform in [0, 1)
  double uniform(double lo, double hi);  // uniform in [lo, hi)
  double normal();                       // standard normal (Box-Muller)
  Eigen::VectorXd normal_vector(int d);

  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_;
  int block_pos_;
  double spare_;
  bool has_spare_;
};

// 64-bit subseed for component k of a run seeded by seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k);

}  // namespace distlab
