#include "flipkljn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "flipkljn/analytics.hpp"
#include "flipkljn/optimize.hpp"

namespace flipkljn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ShardCounters {
  std::uint64_t exchanges = 0;
  std::uint64_t accepted = 0;
  std::uint64_t errors = 0;
  std::uint64_t normal_state = 0;
  std::uint64_t episodes = 0;
  std::uint64_t episode_length_sum = 0;
  std::vector<std::uint64_t> episode_histogram;
  std::uint64_t eve_guessed = 0, eve_correct = 0;
  std::uint64_t eve_nonint = 0, eve_nonint_correct = 0;
};

}  // namespace

EpisodeStats EpisodeTracker::finish() const {
  EpisodeStats stats;
  stats.count = count_;
  stats.mean_length = count_ == 0 ? kNaN
                                  : static_cast<double>(length_sum_) /
                                        static_cast<double>(count_);
  stats.histogram = histogram_;
  return stats;
}

EpisodeStats mismatch_episode_stats(std::span<const ExchangeRecord> records) {
  EpisodeTracker tracker;
  for (const auto& record : records) tracker.feed(record);
  return tracker.finish();
}

std::pair<double, double> binomial_ci(std::uint64_t errors, std::uint64_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("binomial_ci requires trials >= 1");
  if (errors > trials) throw std::invalid_argument("binomial_ci requires errors <= trials");
  const double n = static_cast<double>(trials);
  if (errors == 0) return {0.0, std::min(1.0, 3.0 / n)};
  if (errors == trials) return {std::max(0.0, 1.0 - 3.0 / n), 1.0};
  const double p = static_cast<double>(errors) / n;
  const double half = z * std::sqrt(p * (1.0 - p) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

EveObserver::EveObserver(EveModel model, const NoiseEnvironment& env,
                         const ChannelNoiseConfig& channels)
    : model_(model) {
  double shift = 0.0;
  if (channels.voltage_snr_db) {
    shift = measurement_noise_variance(env, Channel::Voltage, *channels.voltage_snr_db);
  }
  const double low = env.v_ll + shift;
  const double mid = env.v_lh + shift;
  const double high = env.v_hh + shift;
  threshold_low_mid_ = 0.5 * (low + mid);
  threshold_mid_high_ = 0.5 * (mid + high);
}

EveGuess EveObserver::observe(double sigma2_v_hat, Xoshiro256pp& coin) {
  EveGuess guess;
  if (sigma2_v_hat < threshold_low_mid_) {
    guess.classified_high_count = 0;
  } else if (sigma2_v_hat < threshold_mid_high_) {
    guess.classified_high_count = 1;
  } else {
    guess.classified_high_count = 2;
  }

  if (guess.classified_high_count == 1) {
    // Intermediate level: the 0/1 and 1/0 bit pairs are indistinguishable,
    // so no bit guess. The tracking model knows a flip may have been agreed
    // here and updates its hypothesis on a fair coin.
    if (model_ == EveModel::StateTracking && (coin.next() & 1u)) {
      hypothesis_ = opposite(hypothesis_);
    }
    return guess;
  }

  const MapState assumed =
      model_ == EveModel::StateTracking ? hypothesis_ : MapState::Normal;
  const Resistor both =
      guess.classified_high_count == 0 ? Resistor::L : Resistor::H;
  const int bit = map_resistor_to_bit(assumed, both);
  guess.determined = true;
  guess.bit_a = bit;
  guess.bit_b = bit;
  return guess;
}

namespace {

void validate_config(const ExperimentConfig& config) {
  if (config.exchanges < 1) throw std::invalid_argument("exchanges must be >= 1");
  if (config.samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (config.shard_size < 1) throw std::invalid_argument("shard_size must be >= 1");
  if (config.workers < 0) throw std::invalid_argument("workers must be >= 0");
}

ShardCounters run_shard(std::uint64_t shard_index, std::uint64_t shard_exchanges,
                        const ExperimentConfig& config, const ProtocolConfig& pcfg,
                        const NoiseEnvironment& env) {
  ShardCounters counters;
  counters.episode_histogram.assign(32, 0);

  Session session = Session::initial();
  EpisodeTracker episodes;
  EveObserver eve(config.eve, env, config.channels);
  const bool want_eve = config.eve != EveModel::None;
  const bool noisy = config.estimate_mode == EstimateMode::Sampled &&
                     !config.channels.ideal();

  for (std::uint64_t e = 0; e < shard_exchanges; ++e) {
    Xoshiro256pp bits =
        make_stream(config.master_seed, shard_index, e, StreamPurpose::ProtocolBits);
    GaussianStream wire(
        make_stream(config.master_seed, shard_index, e, StreamPurpose::WireSignal));
    GaussianStream alice_noise(make_stream(config.master_seed, shard_index, e,
                                           StreamPurpose::AliceMeasurement));
    GaussianStream bob_noise(make_stream(config.master_seed, shard_index, e,
                                         StreamPurpose::BobMeasurement));
    GaussianStream eve_noise(make_stream(config.master_seed, shard_index, e,
                                         StreamPurpose::EveMeasurement));

    ExchangeStreams streams;
    streams.wire = &wire;
    if (noisy) {
      streams.alice_noise = &alice_noise;
      streams.bob_noise = &bob_noise;
      if (want_eve) streams.eve_noise = &eve_noise;
    }

    EveTap tap;
    const ExchangeRecord rec =
        run_exchange(session, pcfg, env, bits, streams, want_eve ? &tap : nullptr,
                     shard_index * config.shard_size + e);

    ++counters.exchanges;
    if (rec.s_a_prev == MapState::Normal) ++counters.normal_state;
    if (rec.accepted) {
      ++counters.accepted;
      counters.errors += (rec.error_a ? 1 : 0) + (rec.error_b ? 1 : 0);
    }
    episodes.feed(rec);

    if (want_eve) {
      Xoshiro256pp coin =
          make_stream(config.master_seed, shard_index, e, StreamPurpose::EveCoin);
      const EveGuess guess = eve.observe(tap.estimates.sigma2_v, coin);
      if (guess.determined) {
        const bool truth_nonintermediate =
            NoiseEnvironment::high_count({rec.resistor_a, rec.resistor_b}) != 1;
        const std::uint64_t correct = (guess.bit_a == rec.b_a ? 1 : 0) +
                                      (guess.bit_b == rec.b_b ? 1 : 0);
        counters.eve_guessed += 2;
        counters.eve_correct += correct;
        if (truth_nonintermediate) {
          counters.eve_nonint += 2;
          counters.eve_nonint_correct += correct;
        }
      }
    }
  }

  counters.episodes = episodes.count();
  counters.episode_length_sum = episodes.length_sum();
  counters.episode_histogram = episodes.histogram();
  return counters;
}

}  // namespace

ExperimentReport run_trials(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_config(config);

  const NoiseEnvironment env =
      build_environment(config.boltzmann_k, config.temperature_k, config.bandwidth_hz,
                        config.r_low_ohm, config.alpha);

  ThresholdSet thresholds;
  if (config.thresholds) {
    thresholds = *config.thresholds;
    // Explicit thresholds may come from a noise-aware optimization, so the
    // ordering is checked against the effective levels of this run.
    const LevelTriple v = effective_voltage_levels(config.alpha, config.channels);
    const LevelTriple i = effective_current_levels(config.alpha, config.channels);
    const LevelTriple ideal{1.0, 2.0 * config.alpha / (1.0 + config.alpha), config.alpha};
    const bool ok_v = thresholds_feasible(thresholds.beta, thresholds.kappa, v) ||
                      thresholds_feasible(thresholds.beta, thresholds.kappa, ideal);
    const bool ok_i = thresholds_feasible(thresholds.eta, thresholds.xi, i) ||
                      thresholds_feasible(thresholds.eta, thresholds.xi, ideal);
    if (!ok_v || !ok_i) {
      throw std::invalid_argument(
          "thresholds violate the ordering low < lower < mid < upper < high");
    }
  } else {
    thresholds = resolve_thresholds(config.alpha, config.samples, config.detector);
  }

  ProtocolConfig pcfg;
  pcfg.scheme = config.scheme;
  pcfg.detector = config.detector;
  pcfg.samples = config.samples;
  pcfg.thresholds = thresholds;
  pcfg.channels = config.channels;
  pcfg.estimate_mode = config.estimate_mode;
  pcfg.flip_on_flagged = config.flip_on_flagged;

  const std::uint64_t shards =
      (config.exchanges + config.shard_size - 1) / config.shard_size;
  std::vector<ShardCounters> results(shards);

  unsigned hardware = std::thread::hardware_concurrency();
  if (hardware == 0) hardware = 1;
  const unsigned workers = std::min<std::uint64_t>(
      config.workers > 0 ? static_cast<unsigned>(config.workers) : hardware, shards);

  auto shard_exchanges = [&](std::uint64_t s) {
    const std::uint64_t base = s * config.shard_size;
    return std::min<std::uint64_t>(config.shard_size, config.exchanges - base);
  };

  if (workers <= 1) {
    for (std::uint64_t s = 0; s < shards; ++s) {
      results[s] = run_shard(s, shard_exchanges(s), config, pcfg, env);
    }
  } else {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
      for (std::uint64_t s = next.fetch_add(1); s < shards; s = next.fetch_add(1)) {
        results[s] = run_shard(s, shard_exchanges(s), config, pcfg, env);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  report.config = config;
  report.thresholds = thresholds;
  report.episode_histogram.assign(32, 0);
  for (const auto& c : results) {
    report.exchanges += c.exchanges;
    report.accepted += c.accepted;
    report.errors += c.errors;
    report.mismatch_episodes += c.episodes;
    report.eve_guessed_bits += c.eve_guessed;
    report.eve_correct_bits += c.eve_correct;
    report.eve_nonintermediate_bits += c.eve_nonint;
    report.eve_nonintermediate_correct += c.eve_nonint_correct;
  }
  std::uint64_t episode_length_sum = 0;
  std::uint64_t normal_state = 0;
  for (const auto& c : results) {
    episode_length_sum += c.episode_length_sum;
    normal_state += c.normal_state;
    for (std::size_t b = 0; b < report.episode_histogram.size(); ++b) {
      report.episode_histogram[b] += c.episode_histogram[b];
    }
  }

  const std::uint64_t slots = 2 * report.accepted;
  report.ber = slots > 0 ? static_cast<double>(report.errors) / static_cast<double>(slots)
                         : kNaN;
  if (slots > 0) {
    std::tie(report.ber_ci_low, report.ber_ci_high) = binomial_ci(report.errors, slots, 1.96);
  } else {
    report.ber_ci_low = report.ber_ci_high = kNaN;
  }
  report.accepted_fraction =
      static_cast<double>(report.accepted) / static_cast<double>(report.exchanges);
  report.discarded_percentage = 100.0 * (1.0 - report.accepted_fraction);
  report.mean_episode_length =
      report.mismatch_episodes > 0
          ? static_cast<double>(episode_length_sum) /
                static_cast<double>(report.mismatch_episodes)
          : kNaN;
  report.eve_accuracy_overall =
      report.eve_guessed_bits > 0
          ? static_cast<double>(report.eve_correct_bits) /
                static_cast<double>(report.eve_guessed_bits)
          : kNaN;
  report.eve_accuracy_nonintermediate =
      report.eve_nonintermediate_bits > 0
          ? static_cast<double>(report.eve_nonintermediate_correct) /
                static_cast<double>(report.eve_nonintermediate_bits)
          : kNaN;
  report.state_occupancy_normal =
      static_cast<double>(normal_state) / static_cast<double>(report.exchanges);

  report.analytic_pb = kNaN;
  if (config.scheme == Scheme::FlipKLJN && config.detector == DetectorKind::VoltageOnly &&
      config.channels.ideal()) {
    const AnalyticInputs inputs{config.alpha, thresholds.beta, thresholds.kappa,
                                config.samples};
    report.analytic_pb = total_bep(inputs, TailLaw::CltGaussian);
  }

  report.workers_used = static_cast<int>(workers);
  report.shards = shards;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace flipkljn
