#include "flipkljn/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "flipkljn/harness.hpp"

namespace flipkljn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normalized_noise_shift(double alpha, std::optional<double> snr_db) {
  if (!snr_db) return 0.0;
  const double m = 2.0 * alpha / (1.0 + alpha);
  const double mean_level = (1.0 + m + alpha) / 3.0;
  return mean_level / std::pow(10.0, *snr_db / 10.0);
}

}  // namespace

LevelTriple effective_voltage_levels(double alpha, const ChannelNoiseConfig& channels) {
  const double m = 2.0 * alpha / (1.0 + alpha);
  const double c = normalized_noise_shift(alpha, channels.voltage_snr_db);
  return {1.0 + c, m + c, alpha + c};
}

LevelTriple effective_current_levels(double alpha, const ChannelNoiseConfig& channels) {
  // The loop current mirrors the voltage structure: in units of the lowest
  // current level the triple is again (1, 2α/(1+α), α), and measurement
  // noise at a given SNR shifts it by the same normalized constant.
  const double m = 2.0 * alpha / (1.0 + alpha);
  const double c = normalized_noise_shift(alpha, channels.current_snr_db);
  return {1.0 + c, m + c, alpha + c};
}

OptimizationResult minimize_threshold_objective(
    const std::function<double(double, double)>& objective, const LevelTriple& levels,
    double inset_rel, int coarse_points, int refine_rounds, int refine_points) {
  if (!(levels.low < levels.mid && levels.mid < levels.high)) {
    throw std::domain_error("empty feasible threshold box");
  }
  coarse_points = std::max(coarse_points, 33);
  refine_rounds = std::max(refine_rounds, 5);
  refine_points = std::max(refine_points, 9);

  const double span_low = levels.mid - levels.low;
  const double span_high = levels.high - levels.mid;
  const double x_min = levels.low + inset_rel * span_low;
  const double x_max = levels.mid - inset_rel * span_low;
  const double y_min = levels.mid + inset_rel * span_high;
  const double y_max = levels.high - inset_rel * span_high;

  OptimizationResult result;
  result.objective_value = kInf;

  auto evaluate_grid = [&](int round, double xa, double xb, double ya, double yb,
                           int points) {
    RefinementStep step;
    step.round = round;
    step.lower_lo = xa;
    step.lower_hi = xb;
    step.upper_lo = ya;
    step.upper_hi = yb;
    step.best_value = kInf;
    for (int i = 0; i < points; ++i) {
      const double x = xa + (xb - xa) * static_cast<double>(i) / (points - 1);
      if (!(x > levels.low && x < levels.mid)) continue; // clipped, never evaluated
      for (int j = 0; j < points; ++j) {
        const double y = ya + (yb - ya) * static_cast<double>(j) / (points - 1);
        if (!(y > levels.mid && y < levels.high)) continue;
        const double value = objective(x, y);
        ++result.evaluations;
        if (value < step.best_value) {
          step.best_value = value;
          step.best_lower = x;
          step.best_upper = y;
        }
      }
    }
    result.trace.push_back(step);
    if (step.best_value < result.objective_value) {
      result.objective_value = step.best_value;
      result.lower = step.best_lower;
      result.upper = step.best_upper;
    }
  };

  evaluate_grid(0, x_min, x_max, y_min, y_max, coarse_points);
  double cell_x = (x_max - x_min) / (coarse_points - 1);
  double cell_y = (y_max - y_min) / (coarse_points - 1);

  for (int round = 1; round <= refine_rounds; ++round) {
    const double xa = std::max(x_min, result.lower - cell_x);
    const double xb = std::min(x_max, result.lower + cell_x);
    const double ya = std::max(y_min, result.upper - cell_y);
    const double yb = std::min(y_max, result.upper + cell_y);
    evaluate_grid(round, xa, xb, ya, yb, refine_points);
    cell_x = (xb - xa) / (refine_points - 1);
    cell_y = (yb - ya) / (refine_points - 1);
  }
  return result;
}

namespace {

TailLaw law_for(ObjectiveKind kind) {
  return kind == ObjectiveKind::AnalyticPbExact ? TailLaw::ChiSquare
                                                : TailLaw::CltGaussian;
}

// Single-channel total-BEP objective on an effective level triple.
std::function<double(double, double)> analytic_channel_objective(const LevelTriple levels,
                                                                 int samples,
                                                                 TailLaw law) {
  return [levels, samples, law](double lower, double upper) {
    const double matched =
        0.25 * single_channel_error_bracket(levels, lower, upper, samples, law);
    return propagate_total_bep(matched);
  };
}

double simulated_ber(const OptimizationProblem& problem, const ThresholdSet& thresholds) {
  ExperimentConfig config;
  config.scheme = problem.simulated.scheme;
  config.detector = problem.simulated.detector;
  config.alpha = problem.alpha;
  config.samples = problem.samples;
  config.thresholds = thresholds;
  config.channels = problem.channels;
  config.exchanges = problem.simulated.trial_budget;
  config.master_seed = problem.simulated.seed; // common random numbers
  const ExperimentReport report = run_trials(config);
  return std::isnan(report.ber) ? 1.0 : report.ber;
}

}  // namespace

OptimizationResult optimize_voltage_thresholds(const OptimizationProblem& problem) {
  if (!(problem.alpha > 1.0)) throw std::domain_error("alpha must be > 1");
  const LevelTriple levels = effective_voltage_levels(problem.alpha, problem.channels);
  std::function<double(double, double)> objective;
  if (problem.objective == ObjectiveKind::SimulatedBer) {
    objective = [&problem](double beta, double kappa) {
      ThresholdSet t{beta, kappa, beta, kappa};
      return simulated_ber(problem, t);
    };
  } else {
    objective = analytic_channel_objective(levels, problem.samples, law_for(problem.objective));
  }
  return minimize_threshold_objective(objective, levels, problem.inset_rel,
                                      problem.coarse_points, problem.refine_rounds,
                                      problem.refine_points);
}

OptimizationResult optimize_current_thresholds(const OptimizationProblem& problem) {
  if (!(problem.alpha > 1.0)) throw std::domain_error("alpha must be > 1");
  const LevelTriple levels = effective_current_levels(problem.alpha, problem.channels);
  std::function<double(double, double)> objective;
  if (problem.objective == ObjectiveKind::SimulatedBer) {
    objective = [&problem](double eta, double xi) {
      ThresholdSet t{eta, xi, eta, xi};
      return simulated_ber(problem, t);
    };
  } else {
    objective = analytic_channel_objective(levels, problem.samples, law_for(problem.objective));
  }
  return minimize_threshold_objective(objective, levels, problem.inset_rel,
                                      problem.coarse_points, problem.refine_rounds,
                                      problem.refine_points);
}

ThresholdSet resolve_thresholds(double alpha, int samples, DetectorKind detector) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be > 1 (resistance ratio R_H/R_L)");
  }
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  // Every detector runs on the per-channel error-bracket optima of the
  // Gaussian-approximation chain. Two alternatives were evaluated and
  // rejected: a joint undetected-error objective for the flag-raising
  // detector trades flags for undetected errors so aggressively (flag rates
  // past 50% at small N) that the discarded-bit fractions stop resembling
  // the scheme's operating behavior, and exact-law placement moves the upper
  // threshold so far out that the flag detector loses its characteristic
  // sample penalty. The per-channel optima keep both channels individually
  // sharp; the flag then suppresses the coincidence errors.
  (void)detector;
  const ChannelNoiseConfig ideal;
  const LevelTriple v = effective_voltage_levels(alpha, ideal);
  const LevelTriple i = effective_current_levels(alpha, ideal);
  constexpr double kInset = 1e-3;
  constexpr TailLaw kLaw = TailLaw::CltGaussian;

  const auto v_opt = minimize_threshold_objective(
      analytic_channel_objective(v, samples, kLaw), v, kInset, 33, 6, 17);
  const auto i_opt = minimize_threshold_objective(
      analytic_channel_objective(i, samples, kLaw), i, kInset, 33, 6, 17);
  return ThresholdSet{v_opt.lower, v_opt.upper, i_opt.lower, i_opt.upper};
}

// --- plain-text threshold cache -------------------------------------------

std::string detector_name(DetectorKind detector) {
  switch (detector) {
    case DetectorKind::VoltageOnly: return "voltage";
    case DetectorKind::CurrentOnly: return "current";
    case DetectorKind::JVCD: return "jvcd";
    case DetectorKind::Selective: return "selective";
  }
  return "voltage";
}

std::optional<DetectorKind> detector_from_name(const std::string& name) {
  if (name == "voltage") return DetectorKind::VoltageOnly;
  if (name == "current") return DetectorKind::CurrentOnly;
  if (name == "jvcd") return DetectorKind::JVCD;
  if (name == "selective") return DetectorKind::Selective;
  return std::nullopt;
}

namespace {

std::string format_full(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::vector<ThresholdCacheEntry> load_threshold_cache(const std::filesystem::path& path) {
  std::vector<ThresholdCacheEntry> entries;
  std::ifstream in(path);
  if (!in) return entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) { // header
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) return {}; // corrupted cache: recompute everything
    try {
      ThresholdCacheEntry e;
      e.alpha = std::stod(fields[0]);
      e.samples = std::stoi(fields[1]);
      const auto det = detector_from_name(fields[2]);
      if (!det) return {};
      e.detector = *det;
      e.thresholds.beta = std::stod(fields[3]);
      e.thresholds.kappa = std::stod(fields[4]);
      e.thresholds.eta = std::stod(fields[5]);
      e.thresholds.xi = std::stod(fields[6]);
      e.objective = std::stod(fields[7]);
      entries.push_back(e);
    } catch (const std::exception&) {
      return {};
    }
  }
  return entries;
}

void save_threshold_cache(const std::filesystem::path& path,
                          const std::vector<ThresholdCacheEntry>& entries) {
  std::vector<ThresholdCacheEntry> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    if (a.samples != b.samples) return a.samples < b.samples;
    return static_cast<int>(a.detector) < static_cast<int>(b.detector);
  });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write threshold cache: " + path.string());
  out << "alpha,N,detector,beta,kappa,eta,xi,objective\n";
  for (const auto& e : sorted) {
    out << format_full(e.alpha) << ',' << e.samples << ',' << detector_name(e.detector)
        << ',' << format_full(e.thresholds.beta) << ',' << format_full(e.thresholds.kappa)
        << ',' << format_full(e.thresholds.eta) << ',' << format_full(e.thresholds.xi)
        << ',' << format_full(e.objective) << '\n';
  }
}

std::optional<ThresholdCacheEntry> cache_lookup(const std::vector<ThresholdCacheEntry>& entries,
                                                double alpha, int samples,
                                                DetectorKind detector) {
  for (const auto& e : entries) {
    if (e.alpha == alpha && e.samples == samples && e.detector == detector) return e;
  }
  return std::nullopt;
}

}  // namespace flipkljn
