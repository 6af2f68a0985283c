#pragma once

#include <array>

#include "flipkljn/noise.hpp"

// Closed-form bit-error analysis of the flip scheme under the voltage-only
// detector: Gaussian tail function, the eight state-transition tail
// probabilities, mismatch probability, matched-state BEP and total BEP.
// Everything here is normalized — thresholds are multiples of the lowest
// voltage level, so the physical constants cancel.
//
// The derivation treats the estimator tail with the CLT approximation
// N(σ², 2σ⁴/N). Since the estimator of a truly Gaussian process follows a
// scaled chi-square law exactly, each function has an exact-law twin used as
// an oracle for quantifying the approximation error.

namespace flipkljn {

struct AnalyticInputs {
  double alpha = 0.0; // resistance ratio, > 1
  double beta = 0.0;  // lower threshold in units of the lowest level
  double kappa = 0.0; // upper threshold in units of the lowest level
  int samples = 0;    // N, per-channel samples per exchange

  // 2α/(1+α), the intermediate level in lowest-level units.
  double intermediate() const { return 2.0 * alpha / (1.0 + alpha); }
};

enum class TailLaw {
  CltGaussian, // N(σ², 2σ⁴/N) approximation
  ChiSquare,   // exact scaled chi-square law of the estimator
};

// Q(x) = P(Z > x) for standard normal Z. |error| <= 1e-12 on |x| <= 8.
double q_function(double x);

// P(σ̂² > gamma) when σ̂² is the mean of N squared N(0, σ²) draws; the exact
// law N·σ̂²/σ² ~ χ²_N evaluated through the regularized incomplete gamma
// function. Absolute accuracy <= 1e-10. Throws std::domain_error on invalid
// inputs (gamma < 0, sigma2 <= 0, N < 1).
double exact_tail_probability(double gamma, double sigma2, int samples);

// Tails of the estimator around a threshold for a process of the given
// level, under either law. `threshold` and `level` share arbitrary (common)
// units. Both directions are computed directly so that far tails keep full
// precision instead of cancelling against 1.
double estimator_tail_above(double threshold, double level, int samples, TailLaw law);
double estimator_tail_below(double threshold, double level, int samples, TailLaw law);

// The eight transition tail probabilities p1..p8. Pairwise identities
// p1=p4, p2=p3, p5=p8, p6=p7 hold by construction. Throws std::domain_error
// unless 1 < beta < 2α/(1+α) < kappa < alpha.
std::array<double, 8> p_values(const AnalyticInputs& in, TailLaw law = TailLaw::CltGaussian);

// Formula evaluation without the ordering precondition, for boundary studies.
std::array<double, 8> p_values_unchecked(const AnalyticInputs& in,
                                         TailLaw law = TailLaw::CltGaussian);

// P_mm = 0.5·(p1+p2+p5+p6): long-run fraction of exchanges spent with
// mismatched states (transition probability times the mean self-correction
// duration of two exchanges).
double mismatch_probability(const AnalyticInputs& in, TailLaw law = TailLaw::CltGaussian);

// Matched-state bit error probability, 0.25·(p1+p2+p5+p6).
double match_bep(const AnalyticInputs& in, TailLaw law = TailLaw::CltGaussian);

// Total BEP: P_mm·1 + (1−P_mm)·P_bm == 3·P_bm − 2·P_bm².
double total_bep(const AnalyticInputs& in, TailLaw law = TailLaw::CltGaussian);

struct BepBreakdown {
  std::array<double, 8> p{};
  double mismatch_probability = 0.0; // P_mm
  double match_bep = 0.0;            // P_bm
  double total_bep = 0.0;            // P_b
};

BepBreakdown bep_breakdown(const AnalyticInputs& in, TailLaw law = TailLaw::CltGaussian);

// ---------------------------------------------------------------------------
// Generalized per-detector error objectives over arbitrary level triples.
//
// Measurement noise shifts all three levels of a channel by a common
// constant, which breaks the pure-ratio structure above. These objectives
// take the effective levels directly (in the same units as the thresholds)
// and always use the exact estimator law; the threshold optimizer minimizes
// them. Current-channel levels mirror the voltage ones: the peer's high
// resistor produces the LOW current level, so the triple for a channel is
// always ordered low < mid < high with `low` the own-L near hypothesis for
// voltage and the own-H near hypothesis for current.
// ---------------------------------------------------------------------------

// Sum of the four single-channel boundary-crossing probabilities for a
// two-threshold decision rule on the triple: errors of the near pair around
// t_low plus errors of the far pair around t_high. The matched-state BEP of
// a single-channel detector is 0.25 times this bracket.
double single_channel_error_bracket(const LevelTriple& levels, double t_low,
                                    double t_high, int samples, TailLaw law);

// Matched-state per-direction error probability of the flag-raising joint
// detector: both channels must err together for an undetected error, and the
// channels are statistically independent.
double jvcd_matched_error(const LevelTriple& voltage, double beta, double kappa,
                          const LevelTriple& current, double eta, double xi,
                          int samples, TailLaw law);

// Matched-state per-direction error probability of the selective detector
// (current channel when own resistor is L, voltage channel when own is H).
double selective_matched_error(const LevelTriple& voltage, double kappa,
                               const LevelTriple& current, double xi, int samples,
                               TailLaw law);

// Total-BEP propagation of a matched-state error probability through the
// state-mismatch dynamics: 3p − 2p².
inline double propagate_total_bep(double matched_error) {
  return 3.0 * matched_error - 2.0 * matched_error * matched_error;
}

}  // namespace flipkljn
