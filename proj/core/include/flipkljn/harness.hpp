#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "flipkljn/protocol.hpp"

// Monte Carlo driver: runs large batches of exchanges for any scheme and
// detector, attaches eavesdropper models, and aggregates error rates,
// discarded-bit fractions, mismatch-episode statistics and eavesdropper
// accuracy. Work is sharded deterministically by exchange index, so reports
// are bit-identical for any worker count.

namespace flipkljn {

enum class EveModel : std::uint8_t {
  None,
  // Three-way level classification with thresholds at the midpoints of
  // adjacent effective levels; decodes assuming the classical fixed map.
  LevelClassifier,
  // Same classifier run against the flip scheme under the assumption that
  // the parties stay in the Normal state.
  StateAssumingNormal,
  // Maintains a map-state hypothesis, flipping it on a fair coin at every
  // intermediate-level exchange (the two intermediate bit pairs are
  // indistinguishable from the wire).
  StateTracking,
};

struct ExperimentConfig {
  Scheme scheme = Scheme::FlipKLJN;
  DetectorKind detector = DetectorKind::VoltageOnly;

  double boltzmann_k = 1.38e-23;
  double temperature_k = 300.0;
  double bandwidth_hz = 1e6;
  double r_low_ohm = 1000.0;
  double alpha = 10.0;

  int samples = 100;                        // N per channel
  std::optional<ThresholdSet> thresholds;   // empty: resolve numerically
  ChannelNoiseConfig channels;
  std::uint64_t exchanges = 0;
  std::uint64_t master_seed = 1;
  EveModel eve = EveModel::None;
  int workers = 0;                          // 0: hardware concurrency
  EstimateMode estimate_mode = EstimateMode::Sampled;
  bool flip_on_flagged = false;
  std::uint64_t shard_size = 100000;        // exchanges per shard
};

struct EpisodeStats {
  std::uint64_t count = 0;
  double mean_length = 0.0; // NaN when count == 0
  std::vector<std::uint64_t> histogram; // lengths 1.., overflow in last bin
};

struct ExperimentReport {
  ExperimentConfig config;
  ThresholdSet thresholds;

  std::uint64_t exchanges = 0;
  std::uint64_t accepted = 0;
  std::uint64_t errors = 0; // wrong detected bits over both directions

  double ber = 0.0;
  double ber_ci_low = 0.0, ber_ci_high = 0.0;
  double accepted_fraction = 0.0;
  double discarded_percentage = 0.0;

  std::uint64_t mismatch_episodes = 0;
  double mean_episode_length = 0.0;
  std::vector<std::uint64_t> episode_histogram;

  std::uint64_t eve_guessed_bits = 0, eve_correct_bits = 0;
  std::uint64_t eve_nonintermediate_bits = 0, eve_nonintermediate_correct = 0;
  double eve_accuracy_overall = 0.0;
  double eve_accuracy_nonintermediate = 0.0;

  double state_occupancy_normal = 0.0;
  double analytic_pb = 0.0; // NaN unless flip scheme, voltage-only, ideal

  double wall_seconds = 0.0;
  int workers_used = 0;
  std::uint64_t shards = 0;
};

// Runs the configured number of exchanges. State carries across exchanges
// within a shard; every shard starts from freshly initialized matched
// Normal/Normal states and owns derived RNG streams, so aggregation over
// integer counters is independent of scheduling.
ExperimentReport run_trials(const ExperimentConfig& config);

// Normal-approximation binomial confidence interval clamped to [0, 1].
// Zero-error (or all-error) cells substitute the rule-of-three bound 3/n
// for the degenerate zero-width interval.
std::pair<double, double> binomial_ci(std::uint64_t errors, std::uint64_t trials, double z);

// Streaming mismatch-episode bookkeeping. An episode begins at the first
// exchange executed with S_A != S_B and ends at realignment; its length
// counts the accepted exchanges in between. An episode still open when the
// stream ends is dropped.
class EpisodeTracker {
 public:
  explicit EpisodeTracker(std::size_t histogram_bins = 32)
      : histogram_(histogram_bins, 0) {}

  void feed(const ExchangeRecord& record) {
    const bool mismatched = record.s_a_prev != record.s_b_prev;
    if (!mismatched) return;
    active_ = true;
    if (record.accepted) ++current_length_;
    if (record.s_a_next == record.s_b_next) {
      ++count_;
      length_sum_ += current_length_;
      const std::size_t bin =
          current_length_ >= histogram_.size() ? histogram_.size() - 1
              : (current_length_ == 0 ? 0 : static_cast<std::size_t>(current_length_ - 1));
      ++histogram_[bin];
      active_ = false;
      current_length_ = 0;
    }
  }

  EpisodeStats finish() const;

  std::uint64_t count() const { return count_; }
  std::uint64_t length_sum() const { return length_sum_; }
  const std::vector<std::uint64_t>& histogram() const { return histogram_; }

 private:
  bool active_ = false;
  std::uint64_t current_length_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t length_sum_ = 0;
  std::vector<std::uint64_t> histogram_;
};

EpisodeStats mismatch_episode_stats(std::span<const ExchangeRecord> records);

// One eavesdropper bit-pair guess for a single exchange.
struct EveGuess {
  bool determined = false; // false at intermediate levels
  int bit_a = -1, bit_b = -1;
  int classified_high_count = 1; // 0 = low, 1 = intermediate, 2 = high
};

// Passive eavesdropper on the shared wire. She observes the same signal as
// the parties (plus her own measurement noise when configured) and is
// granted exact knowledge of the environment and sample count.
class EveObserver {
 public:
  EveObserver(EveModel model, const NoiseEnvironment& env,
              const ChannelNoiseConfig& channels);

  // Decides from her voltage-variance estimate; the coin stream drives the
  // state-tracking hypothesis update at intermediate levels.
  EveGuess observe(double sigma2_v_hat, Xoshiro256pp& coin);

  MapState hypothesis() const { return hypothesis_; }

 private:
  EveModel model_;
  double threshold_low_mid_ = 0.0;
  double threshold_mid_high_ = 0.0;
  MapState hypothesis_ = MapState::Normal;
};

}  // namespace flipkljn
