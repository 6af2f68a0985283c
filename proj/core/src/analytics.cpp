#include "flipkljn/analytics.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <stdexcept>

namespace flipkljn {

namespace {

void validate_ordering(const AnalyticInputs& in) {
  if (!(in.alpha > 1.0) || !std::isfinite(in.alpha)) {
    throw std::domain_error("alpha must be > 1");
  }
  if (in.samples < 1) throw std::domain_error("samples must be >= 1");
  const double m = in.intermediate();
  if (!(1.0 < in.beta && in.beta < m && m < in.kappa && in.kappa < in.alpha)) {
    throw std::domain_error("threshold ordering 1 < beta < 2a/(1+a) < kappa < alpha violated");
  }
}

}  // namespace

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double exact_tail_probability(double gamma, double sigma2, int samples) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::domain_error("gamma must be >= 0");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::domain_error("sigma2 must be > 0");
  if (samples < 1) throw std::domain_error("samples must be >= 1");
  // P(sigma_hat^2 > gamma) = P(chi2_N > N*gamma/sigma2) = Q(N/2, N*gamma/(2*sigma2)).
  const double a = 0.5 * static_cast<double>(samples);
  const double x = 0.5 * static_cast<double>(samples) * gamma / sigma2;
  return boost::math::gamma_q(a, x);
}

double estimator_tail_above(double threshold, double level, int samples, TailLaw law) {
  if (law == TailLaw::ChiSquare) return exact_tail_probability(threshold, level, samples);
  const double spread = level * std::sqrt(2.0 / static_cast<double>(samples));
  return q_function((threshold - level) / spread);
}

double estimator_tail_below(double threshold, double level, int samples, TailLaw law) {
  if (law == TailLaw::ChiSquare) {
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
      throw std::domain_error("gamma must be >= 0");
    }
    if (!(level > 0.0) || !std::isfinite(level)) throw std::domain_error("sigma2 must be > 0");
    if (samples < 1) throw std::domain_error("samples must be >= 1");
    const double a = 0.5 * static_cast<double>(samples);
    const double x = 0.5 * static_cast<double>(samples) * threshold / level;
    return boost::math::gamma_p(a, x);
  }
  const double spread = level * std::sqrt(2.0 / static_cast<double>(samples));
  return q_function((level - threshold) / spread);
}

std::array<double, 8> p_values_unchecked(const AnalyticInputs& in, TailLaw law) {
  const double m = in.intermediate();
  const int n = in.samples;
  const double p1 = estimator_tail_above(in.beta, 1.0, n, law);
  const double p2 = estimator_tail_above(in.kappa, m, n, law);
  const double p5 = estimator_tail_below(in.beta, m, n, law);
  const double p6 = estimator_tail_below(in.kappa, in.alpha, n, law);
  return {p1, p2, p2, p1, p5, p6, p6, p5};
}

std::array<double, 8> p_values(const AnalyticInputs& in, TailLaw law) {
  validate_ordering(in);
  return p_values_unchecked(in, law);
}

double mismatch_probability(const AnalyticInputs& in, TailLaw law) {
  const auto p = p_values(in, law);
  return 0.5 * (p[0] + p[1] + p[4] + p[5]);
}

double match_bep(const AnalyticInputs& in, TailLaw law) {
  const auto p = p_values(in, law);
  return 0.25 * (p[0] + p[1] + p[4] + p[5]);
}

double total_bep(const AnalyticInputs& in, TailLaw law) {
  const double pbm = match_bep(in, law);
  const double pmm = 2.0 * pbm;
  return pmm + (1.0 - pmm) * pbm;
}

BepBreakdown bep_breakdown(const AnalyticInputs& in, TailLaw law) {
  BepBreakdown out;
  out.p = p_values(in, law);
  out.match_bep = 0.25 * (out.p[0] + out.p[1] + out.p[4] + out.p[5]);
  out.mismatch_probability = 2.0 * out.match_bep;
  out.total_bep = out.mismatch_probability + (1.0 - out.mismatch_probability) * out.match_bep;
  return out;
}

double single_channel_error_bracket(const LevelTriple& levels, double t_low,
                                    double t_high, int samples, TailLaw law) {
  return estimator_tail_above(t_low, levels.low, samples, law) +
         estimator_tail_below(t_low, levels.mid, samples, law) +
         estimator_tail_above(t_high, levels.mid, samples, law) +
         estimator_tail_below(t_high, levels.high, samples, law);
}

double jvcd_matched_error(const LevelTriple& voltage, double beta, double kappa,
                          const LevelTriple& current, double eta, double xi,
                          int samples, TailLaw law) {
  // Truth rows, per deciding party. The voltage triple is (own-L near, mid,
  // own-H far); the current triple mirrors it, so the own-L decision uses the
  // upper current threshold xi and the own-H decision the lower one eta.
  // Undetected error = both channels wrong; channels are independent.
  const double e_ll = estimator_tail_above(beta, voltage.low, samples, law) *
                      estimator_tail_below(xi, current.high, samples, law);
  const double e_lh = estimator_tail_below(beta, voltage.mid, samples, law) *
                      estimator_tail_above(xi, current.mid, samples, law);
  const double e_hl = estimator_tail_above(kappa, voltage.mid, samples, law) *
                      estimator_tail_below(eta, current.mid, samples, law);
  const double e_hh = estimator_tail_below(kappa, voltage.high, samples, law) *
                      estimator_tail_above(eta, current.low, samples, law);
  return 0.25 * (e_ll + e_lh + e_hl + e_hh);
}

double selective_matched_error(const LevelTriple& voltage, double kappa,
                               const LevelTriple& current, double xi, int samples,
                               TailLaw law) {
  // Own L -> current channel (far pair around xi); own H -> voltage channel
  // (far pair around kappa). Only the wide-separation pairs remain.
  const double e_ll = estimator_tail_below(xi, current.high, samples, law);
  const double e_lh = estimator_tail_above(xi, current.mid, samples, law);
  const double e_hl = estimator_tail_above(kappa, voltage.mid, samples, law);
  const double e_hh = estimator_tail_below(kappa, voltage.high, samples, law);
  return 0.25 * (e_ll + e_lh + e_hl + e_hh);
}

}  // namespace flipkljn
