#include "flipkljn/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flipkljn {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

double parallel_noise(double four_ktb, double r_a, double r_b) {
  return four_ktb * (r_a * r_b) / (r_a + r_b);
}

}  // namespace

NoiseEnvironment build_environment(double boltzmann_k, double temperature_k,
                                   double bandwidth_hz, double r_low_ohm,
                                   double alpha) {
  require_positive(boltzmann_k, "boltzmann_k");
  require_positive(temperature_k, "temperature_k");
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(r_low_ohm, "r_low_ohm");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be > 1 (distinct resistor values)");
  }

  NoiseEnvironment env;
  env.boltzmann_k = boltzmann_k;
  env.temperature_k = temperature_k;
  env.bandwidth_hz = bandwidth_hz;
  env.r_low_ohm = r_low_ohm;
  env.alpha = alpha;
  env.r_high_ohm = alpha * r_low_ohm;

  const double four_ktb = 4.0 * boltzmann_k * temperature_k * bandwidth_hz;
  env.v_ll = parallel_noise(four_ktb, r_low_ohm, r_low_ohm);
  env.v_lh = parallel_noise(four_ktb, r_low_ohm, env.r_high_ohm);
  env.v_hh = parallel_noise(four_ktb, env.r_high_ohm, env.r_high_ohm);

  env.i_ll = four_ktb / (r_low_ohm + r_low_ohm);
  env.i_lh = four_ktb / (r_low_ohm + env.r_high_ohm);
  env.i_hh = four_ktb / (env.r_high_ohm + env.r_high_ohm);
  return env;
}

WireSamples generate_exchange_samples(const NoiseEnvironment& env, ResistorPair pair,
                                      std::size_t n, GaussianStream& rng) {
  if (n == 0) throw std::invalid_argument("sample count must be >= 1");

  WireSamples out;
  out.truth = pair;
  out.voltage.resize(n);
  out.current.resize(n);

  const double sd_v = std::sqrt(env.voltage_level(pair));
  for (std::size_t k = 0; k < n; ++k) out.voltage[k] = sd_v * rng.next();
  const double sd_i = std::sqrt(env.current_level(pair));
  for (std::size_t k = 0; k < n; ++k) out.current[k] = sd_i * rng.next();
  return out;
}

double average_signal_power(const NoiseEnvironment& env, Channel channel) {
  if (channel == Channel::Voltage) return (env.v_ll + env.v_lh + env.v_hh) / 3.0;
  return (env.i_ll + env.i_lh + env.i_hh) / 3.0;
}

WireSamples add_measurement_noise(const WireSamples& samples,
                                  const MeasurementChannel& config,
                                  const NoiseEnvironment& env, GaussianStream& rng) {
  if (config.ideal()) return samples;

  WireSamples out = samples;
  const double sd_n =
      std::sqrt(measurement_noise_variance(env, config.channel, *config.snr_db));
  auto& seq = config.channel == Channel::Voltage ? out.voltage : out.current;
  for (double& x : seq) x += sd_n * rng.next();
  return out;
}

double estimate_variance(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("cannot estimate variance of an empty sequence");
  double acc = 0.0;
  for (double x : samples) acc += x * x;
  return acc / static_cast<double>(samples.size());
}

}  // namespace flipkljn
