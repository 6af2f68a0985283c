#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flipkljn/rng.hpp"

// Physical noise model of the resistor loop: Johnson-noise variance levels,
// Gaussian wire-sample generation, measurement noise injection at a given
// SNR, and the mean-of-squares variance estimator.

namespace flipkljn {

enum class Resistor : std::uint8_t { L = 0, H = 1 };

struct ResistorPair {
  Resistor alice = Resistor::L;
  Resistor bob = Resistor::L;

  friend bool operator==(const ResistorPair&, const ResistorPair&) = default;
};

enum class Channel : std::uint8_t { Voltage = 0, Current = 1 };

// Three ordered variance levels of one channel in common units, used for
// threshold feasibility boxes and the generalized error objectives. For the
// voltage channel the triple is (low, intermediate, high); the current
// channel mirrors the roles so its triple is ordered the same way.
struct LevelTriple {
  double low = 0.0;
  double mid = 0.0;
  double high = 0.0;
};

// Noise levels of the loop. Voltage variances are in V^2 and follow
// 4kTΔf · (R_A R_B)/(R_A + R_B); loop-current variances are in A^2 and
// follow 4kTΔf / (R_A + R_B), the Johnson-noise current of the series loop.
struct NoiseEnvironment {
  double boltzmann_k = 0.0;   // J/K
  double temperature_k = 0.0; // K
  double bandwidth_hz = 0.0;  // Hz
  double r_low_ohm = 0.0;     // Ω
  double alpha = 0.0;         // R_H / R_L, dimensionless
  double r_high_ohm = 0.0;    // Ω

  double v_ll = 0.0, v_lh = 0.0, v_hh = 0.0; // V^2
  double i_ll = 0.0, i_lh = 0.0, i_hh = 0.0; // A^2

  // 2α/(1+α), the intermediate level in units of the lowest voltage level.
  double intermediate_ratio() const { return 2.0 * alpha / (1.0 + alpha); }

  double voltage_level(ResistorPair pair) const {
    switch (high_count(pair)) {
      case 0: return v_ll;
      case 1: return v_lh;
      default: return v_hh;
    }
  }

  double current_level(ResistorPair pair) const {
    switch (high_count(pair)) {
      case 0: return i_ll;
      case 1: return i_lh;
      default: return i_hh;
    }
  }

  double level(Channel channel, ResistorPair pair) const {
    return channel == Channel::Voltage ? voltage_level(pair) : current_level(pair);
  }

  static int high_count(ResistorPair pair) {
    return (pair.alice == Resistor::H ? 1 : 0) + (pair.bob == Resistor::H ? 1 : 0);
  }
};

// Validates inputs (all positive, alpha > 1) and derives the six levels.
// Throws std::invalid_argument on a bad configuration.
NoiseEnvironment build_environment(double boltzmann_k, double temperature_k,
                                   double bandwidth_hz, double r_low_ohm,
                                   double alpha);

// One measured channel: which signal, and the measurement SNR in dB.
// An empty snr_db means an ideal (noise-free) measurement chain.
struct MeasurementChannel {
  Channel channel = Channel::Voltage;
  std::optional<double> snr_db;

  bool ideal() const { return !snr_db.has_value(); }
};

// Per-exchange measurement configuration for both channels.
struct ChannelNoiseConfig {
  std::optional<double> voltage_snr_db;
  std::optional<double> current_snr_db;

  bool ideal() const { return !voltage_snr_db && !current_snr_db; }
  std::optional<double> snr_db(Channel channel) const {
    return channel == Channel::Voltage ? voltage_snr_db : current_snr_db;
  }
};

// The shared wire signal for one exchange: N voltage and N current samples
// drawn from the level dictated by the truth pair. Immutable after creation.
struct WireSamples {
  std::vector<double> voltage;
  std::vector<double> current;
  ResistorPair truth;
};

// Draws N zero-mean Gaussian samples per channel from the given stream.
// Every observer of the exchange sees this same object; the wire is shared.
WireSamples generate_exchange_samples(const NoiseEnvironment& env, ResistorPair pair,
                                      std::size_t n, GaussianStream& rng);

// Mean of the three variance levels of the requested channel; the reference
// signal power for SNR definitions.
double average_signal_power(const NoiseEnvironment& env, Channel channel);

// Per-sample measurement-noise variance implied by an SNR in dB.
inline double measurement_noise_variance(const NoiseEnvironment& env, Channel channel,
                                         double snr_db) {
  return average_signal_power(env, channel) / std::pow(10.0, snr_db / 10.0);
}

// Returns a copy with independent zero-mean Gaussian measurement noise added
// to the configured channel. Each observer calls this with its own stream,
// so observers of the same exchange get independent noise realizations.
WireSamples add_measurement_noise(const WireSamples& samples,
                                  const MeasurementChannel& config,
                                  const NoiseEnvironment& env, GaussianStream& rng);

// Mean of squares (1/N)·Σ x_k². The wire process has known zero mean, so no
// mean subtraction takes place. Throws std::invalid_argument when empty.
double estimate_variance(std::span<const double> samples);

// Streaming equivalent of generate + estimate for one channel with no
// measurement noise: draws n samples at the given level and returns the
// mean of squares. Consumes the stream exactly like generate_exchange_samples
// does for that channel, producing bit-identical estimates.
inline double sample_variance_estimate(double level, std::size_t n, GaussianStream& rng) {
  const double sd = std::sqrt(level);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = sd * rng.next();
    acc += x * x;
  }
  return acc / static_cast<double>(n);
}

}  // namespace flipkljn
