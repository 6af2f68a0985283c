#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flipkljn/analytics.hpp"
#include "flipkljn/protocol.hpp"

// Numerical determination of the decision thresholds that minimize the bit
// error probability: a deterministic coarse grid over the feasible box
// followed by local refinement around the incumbent. Objectives are either
// the closed-form error chain (CLT or exact estimator law) or a seeded
// simulated BER with common random numbers.

namespace flipkljn {

enum class ObjectiveKind : std::uint8_t {
  AnalyticPbClt,   // Gaussian-approximation error chain
  AnalyticPbExact, // same chain with the exact chi-square estimator law
  SimulatedBer,    // Monte Carlo BER at a fixed seed (common random numbers)
};

struct SimulatedObjective {
  Scheme scheme = Scheme::FlipKLJN;
  DetectorKind detector = DetectorKind::VoltageOnly;
  std::uint64_t trial_budget = 200000;
  std::uint64_t seed = 1;
};

struct OptimizationProblem {
  double alpha = 10.0;
  int samples = 100;
  ObjectiveKind objective = ObjectiveKind::AnalyticPbClt;
  SimulatedObjective simulated;  // used when objective == SimulatedBer
  ChannelNoiseConfig channels;   // shifts the effective levels when not ideal
  double inset_rel = 1e-3;       // relative inset of the open feasible box
  int coarse_points = 33;        // coarse lattice per axis
  int refine_rounds = 6;         // local refinement rounds
  int refine_points = 17;        // refinement lattice per axis
};

struct RefinementStep {
  int round = 0;
  double lower_lo = 0, lower_hi = 0, upper_lo = 0, upper_hi = 0;
  double best_lower = 0, best_upper = 0, best_value = 0;
};

struct OptimizationResult {
  double lower = 0.0; // beta for the voltage channel, eta for current
  double upper = 0.0; // kappa for the voltage channel, xi for current
  double objective_value = 0.0;
  std::uint64_t evaluations = 0;
  std::vector<RefinementStep> trace;
};

// Effective (measurement-noise-shifted) level triples in threshold units:
// adding per-sample noise of variance c·(lowest level) moves every level up
// by the same constant. The normalized shift is (1 + m + α)/3 / 10^(SNR/10)
// for both channels, independent of the physical constants.
LevelTriple effective_voltage_levels(double alpha, const ChannelNoiseConfig& channels);
LevelTriple effective_current_levels(double alpha, const ChannelNoiseConfig& channels);

// Deterministic grid-plus-refinement minimizer over the feasible threshold
// box of `levels`. Candidates violating the ordering are never evaluated.
OptimizationResult minimize_threshold_objective(
    const std::function<double(double, double)>& objective, const LevelTriple& levels,
    double inset_rel, int coarse_points, int refine_rounds, int refine_points);

// Optimizes (beta, kappa) for the voltage channel.
OptimizationResult optimize_voltage_thresholds(const OptimizationProblem& problem);

// Optimizes (eta, xi) for the current channel. The analytic objectives use
// the mirrored current-level structure; the simulated objective runs the
// current-only detector.
OptimizationResult optimize_current_thresholds(const OptimizationProblem& problem);

// Default threshold resolution for experiment runs: the per-channel error
// brackets minimized under the exact estimator law on the ideal levels.
// Thresholds are keyed by (alpha, N, detector) alone; runs with measurement
// noise reuse the ideal-channel values, mirroring the cache layout. A
// noise-aware optimization is still available through the optimizer API by
// setting the problem's channel configuration.
ThresholdSet resolve_thresholds(double alpha, int samples, DetectorKind detector);

// --- plain-text threshold cache -------------------------------------------

struct ThresholdCacheEntry {
  double alpha = 0.0;
  int samples = 0;
  DetectorKind detector = DetectorKind::VoltageOnly;
  ThresholdSet thresholds;
  double objective = 0.0;
};

std::string detector_name(DetectorKind detector);
std::optional<DetectorKind> detector_from_name(const std::string& name);

std::vector<ThresholdCacheEntry> load_threshold_cache(const std::filesystem::path& path);
void save_threshold_cache(const std::filesystem::path& path,
                          const std::vector<ThresholdCacheEntry>& entries);
std::optional<ThresholdCacheEntry> cache_lookup(const std::vector<ThresholdCacheEntry>& entries,
                                                double alpha, int samples,
                                                DetectorKind detector);

}  // namespace flipkljn
