#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flipkljn/analytics.hpp"
#include "flipkljn/noise.hpp"
#include "flipkljn/rng.hpp"

using namespace flipkljn;

namespace {

constexpr double kBoltzmann = 1.38e-23;

NoiseEnvironment reference_env() { return build_environment(kBoltzmann, 300, 1e6, 1000, 10); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("voltage variance levels at the reference physical constants") {
  const auto env = reference_env();
  CHECK(rel(env.v_ll, 8.28e-12) < 1e-12);
  CHECK(rel(env.v_lh, (20.0 / 11.0) * 8.28e-12) < 1e-12);
  CHECK(rel(env.v_hh, 8.28e-11) < 1e-12);
  CHECK(env.r_high_ohm == doctest::Approx(10000.0));
}

TEST_CASE("level ratio structure holds for arbitrary environments") {
  Xoshiro256pp rng(7);
  for (int i = 0; i < 50; ++i) {
    const double t = 50 + 400 * rng.uniform01();
    const double bw = 1e3 + 1e7 * rng.uniform01();
    const double rl = 10 + 1e5 * rng.uniform01();
    const double alpha = 1.1 + 60 * rng.uniform01();
    const auto env = build_environment(kBoltzmann, t, bw, rl, alpha);
    const double m = 2 * alpha / (1 + alpha);
    CHECK(rel(env.v_lh / env.v_ll, m) < 1e-12);
    CHECK(rel(env.v_hh / env.v_ll, alpha) < 1e-12);
    CHECK(rel(env.i_lh / env.i_hh, m) < 1e-12);
    CHECK(rel(env.i_ll / env.i_hh, alpha) < 1e-12);
    CHECK(env.v_ll < env.v_lh);
    CHECK(env.v_lh < env.v_hh);
    CHECK(env.i_hh < env.i_lh);
    CHECK(env.i_lh < env.i_ll);
  }
}

TEST_CASE("identical resistors collapse all levels") {
  const auto env = build_environment(kBoltzmann, 300, 1e6, 1000, 1 + 1e-12);
  CHECK(rel(env.v_lh, env.v_ll) < 1e-9);
  CHECK(rel(env.v_hh, env.v_ll) < 1e-9);
  CHECK(rel(average_signal_power(env, Channel::Voltage), env.v_ll) < 1e-9);
}

TEST_CASE("environment validation rejects bad parameters") {
  CHECK_THROWS_AS(build_environment(0, 300, 1e6, 1000, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_environment(kBoltzmann, -2, 1e6, 1000, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_environment(kBoltzmann, 300, 0, 1000, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_environment(kBoltzmann, 300, 1e6, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_environment(kBoltzmann, 300, 1e6, 1000, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_environment(kBoltzmann, 300, 1e6, 1000, 0.5), std::invalid_argument);
}

TEST_CASE("average signal power is the mean of the three levels") {
  const auto env = reference_env();
  const double avg_v = average_signal_power(env, Channel::Voltage);
  CHECK(avg_v == doctest::Approx((env.v_ll + env.v_lh + env.v_hh) / 3.0).epsilon(1e-14));
  CHECK(rel(avg_v, 3.538e-11) < 1e-3);
  const double avg_i = average_signal_power(env, Channel::Current);
  CHECK(avg_i == doctest::Approx((env.i_ll + env.i_lh + env.i_hh) / 3.0).epsilon(1e-14));
  // 0 dB: per-sample noise variance equals the average signal power.
  CHECK(measurement_noise_variance(env, Channel::Voltage, 0.0) ==
        doctest::Approx(avg_v).epsilon(1e-14));
}

TEST_CASE("sample generation is deterministic per stream key") {
  const auto env = reference_env();
  GaussianStream g1(make_stream(42, 3, 17, StreamPurpose::WireSignal));
  GaussianStream g2(make_stream(42, 3, 17, StreamPurpose::WireSignal));
  const auto a = generate_exchange_samples(env, {Resistor::L, Resistor::H}, 4, g1);
  const auto b = generate_exchange_samples(env, {Resistor::L, Resistor::H}, 4, g2);
  REQUIRE(a.voltage.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(a.voltage[k] == b.voltage[k]);
    CHECK(a.current[k] == b.current[k]);
  }
  GaussianStream g3(make_stream(42, 3, 18, StreamPurpose::WireSignal));
  const auto c = generate_exchange_samples(env, {Resistor::L, Resistor::H}, 4, g3);
  CHECK(a.voltage[0] != c.voltage[0]);
  CHECK_THROWS_AS(generate_exchange_samples(env, {}, 0, g1), std::invalid_argument);
}

TEST_CASE("sample variance matches the configured level at large N") {
  const auto env = reference_env();
  GaussianStream g(make_stream(11, 0, 0, StreamPurpose::WireSignal));
  const auto ll = generate_exchange_samples(env, {Resistor::L, Resistor::L}, 1000000, g);
  CHECK(rel(estimate_variance(ll.voltage), env.v_ll) < 0.01);
  const auto hh = generate_exchange_samples(env, {Resistor::H, Resistor::H}, 1000000, g);
  CHECK(rel(estimate_variance(hh.current), env.i_hh) < 0.01);
}

TEST_CASE("variance estimator is the mean of squares") {
  CHECK(estimate_variance(std::vector<double>(10, 0.0)) == 0.0);
  CHECK(estimate_variance(std::vector<double>(7, 3.0)) == doctest::Approx(9.0));
  CHECK_THROWS_AS(estimate_variance(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("estimator is unbiased over many repetitions") {
  const int n = 64;
  const int reps = 10000;
  const double sigma2 = 2.5;
  double mean = 0.0;
  for (int r = 0; r < reps; ++r) {
    GaussianStream g(make_stream(5, 1, static_cast<std::uint64_t>(r), StreamPurpose::WireSignal));
    mean += sample_variance_estimate(sigma2, n, g);
  }
  mean /= reps;
  const double tol = 3.0 * std::sqrt(2.0 * sigma2 * sigma2 / (double(n) * reps));
  CHECK(std::abs(mean - sigma2) < tol);
}

TEST_CASE("scaled estimator follows the chi-square law (KS test)") {
  const int n = 6;
  const int draws = 10000;
  std::vector<double> values(draws);
  for (int r = 0; r < draws; ++r) {
    GaussianStream g(make_stream(9, 2, static_cast<std::uint64_t>(r), StreamPurpose::WireSignal));
    values[r] = sample_variance_estimate(1.0, n, g);
  }
  std::sort(values.begin(), values.end());
  double d_stat = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double cdf = 1.0 - exact_tail_probability(values[i], 1.0, n);
    d_stat = std::max(d_stat, std::abs(cdf - (i + 1.0) / draws));
    d_stat = std::max(d_stat, std::abs(cdf - double(i) / draws));
  }
  // Kolmogorov-Smirnov critical value at significance 0.01.
  CHECK(d_stat < 1.62762 / std::sqrt(double(draws)));
}

TEST_CASE("measurement noise: identity when ideal, independent per observer") {
  const auto env = reference_env();
  GaussianStream g(make_stream(21, 0, 5, StreamPurpose::WireSignal));
  const auto shared = generate_exchange_samples(env, {Resistor::L, Resistor::L}, 64, g);

  const MeasurementChannel ideal{Channel::Voltage, std::nullopt};
  GaussianStream unused(make_stream(21, 0, 5, StreamPurpose::AliceMeasurement));
  const auto same = add_measurement_noise(shared, ideal, env, unused);
  CHECK(same.voltage == shared.voltage);

  const MeasurementChannel noisy{Channel::Voltage, 10.0};
  GaussianStream ga(make_stream(21, 0, 5, StreamPurpose::AliceMeasurement));
  GaussianStream gb(make_stream(21, 0, 5, StreamPurpose::BobMeasurement));
  const auto alice = add_measurement_noise(shared, noisy, env, ga);
  const auto bob = add_measurement_noise(shared, noisy, env, gb);
  CHECK(alice.voltage != bob.voltage);
  CHECK(alice.current == shared.current); // untouched channel
  // Underlying shared signal is identical: noise differences are independent.
  bool differs = false;
  for (std::size_t k = 0; k < shared.voltage.size(); ++k) {
    if (alice.voltage[k] - shared.voltage[k] != bob.voltage[k] - shared.voltage[k]) {
      differs = true;
    }
  }
  CHECK(differs);
}

TEST_CASE("injected measurement noise has the SNR-implied variance") {
  const auto env = reference_env();
  const double snr_db = 7.0;
  const double want = measurement_noise_variance(env, Channel::Voltage, snr_db);
  // Noise alone: difference between noisy and clean samples.
  GaussianStream g(make_stream(33, 0, 0, StreamPurpose::WireSignal));
  const auto shared = generate_exchange_samples(env, {Resistor::L, Resistor::L}, 200000, g);
  GaussianStream ga(make_stream(33, 0, 0, StreamPurpose::AliceMeasurement));
  const auto noisy = add_measurement_noise(shared, {Channel::Voltage, snr_db}, env, ga);
  double acc = 0.0;
  for (std::size_t k = 0; k < shared.voltage.size(); ++k) {
    const double d = noisy.voltage[k] - shared.voltage[k];
    acc += d * d;
  }
  CHECK(rel(acc / double(shared.voltage.size()), want) < 0.02);
}

TEST_CASE("distinct stream purposes are decorrelated") {
  GaussianStream a(make_stream(1, 0, 0, StreamPurpose::WireSignal));
  GaussianStream b(make_stream(1, 0, 0, StreamPurpose::AliceMeasurement));
  double corr = 0, va = 0, vb = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = a.next(), y = b.next();
    corr += x * y;
    va += x * x;
    vb += y * y;
  }
  CHECK(std::abs(corr / std::sqrt(va * vb)) < 0.03);
}
