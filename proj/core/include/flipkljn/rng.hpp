#pragma once

#include <cmath>
#include <cstdint>

// Deterministic random number generation for the simulator.
//
// Every exchange gets its own short-lived generator, derived from
// (master_seed, shard_index, exchange_index, purpose) with a SplitMix64
// finalizer chain. The generator itself is xoshiro256++ and Gaussian
// variates come from the Marsaglia polar method. All three algorithms are
// fixed: replaying a seed reproduces bit-identical sample sequences on any
// platform with IEEE-754 doubles, independent of thread scheduling.

namespace flipkljn {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t splitmix64_scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Advances the state by the golden gamma and returns the next word.
inline constexpr std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += kGoldenGamma;
  return splitmix64_scramble(state);
}

// Order-sensitive combiner used to key per-exchange streams.
inline constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  return splitmix64_scramble(a ^ (kGoldenGamma * (b + 1) + (a << 6) + (a >> 2)));
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
    // xoshiro state must not be all zero; splitmix expansion of any seed
    // cannot produce that, but guard anyway.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = kGoldenGamma;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

// Purposes for per-exchange derived streams. Each observer owns a stream so
// attaching or detaching an eavesdropper never perturbs the parties' draws.
enum class StreamPurpose : std::uint32_t {
  ProtocolBits = 0,
  WireSignal = 1,
  AliceMeasurement = 2,
  BobMeasurement = 3,
  EveMeasurement = 4,
  EveCoin = 5,
};

inline Xoshiro256pp make_stream(std::uint64_t master_seed, std::uint64_t shard,
                                std::uint64_t exchange, StreamPurpose purpose) {
  std::uint64_t key = mix_key(master_seed, shard);
  key = mix_key(key, exchange);
  key = mix_key(key, static_cast<std::uint64_t>(purpose));
  return Xoshiro256pp(key);
}

// Standard normal generator (Marsaglia polar method) over a Xoshiro stream.
class GaussianStream {
 public:
  explicit GaussianStream(Xoshiro256pp engine) : engine_(engine) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * engine_.uniform01() - 1.0;
      v = 2.0 * engine_.uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Xoshiro256pp& engine() { return engine_; }

 private:
  Xoshiro256pp engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace flipkljn
