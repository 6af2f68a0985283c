#include "cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "flipkljn/analytics.hpp"
#include "flipkljn/optimize.hpp"

namespace flipkljn::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_float(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

nlohmann::ordered_json json_number(double value) {
  if (std::isnan(value) || std::isinf(value)) return nullptr;
  return value;
}

Scheme parse_scheme(const std::string& name) {
  if (name == "flip") return Scheme::FlipKLJN;
  if (name == "kljn" || name == "classical") return Scheme::ClassicalKLJN;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected flip|kljn)");
}

DetectorKind parse_detector(const std::string& name) {
  const auto detector = detector_from_name(name);
  if (!detector) {
    throw std::invalid_argument("unknown detector '" + name +
                                "' (expected voltage|current|jvcd|selective)");
  }
  return *detector;
}

EveModel parse_eve(const std::string& name) {
  if (name == "none") return EveModel::None;
  if (name == "level") return EveModel::LevelClassifier;
  if (name == "state-normal") return EveModel::StateAssumingNormal;
  if (name == "state-tracking") return EveModel::StateTracking;
  throw std::invalid_argument(
      "unknown eve model '" + name + "' (expected none|level|state-normal|state-tracking)");
}

std::string eve_name(EveModel model) {
  switch (model) {
    case EveModel::None: return "none";
    case EveModel::LevelClassifier: return "level";
    case EveModel::StateAssumingNormal: return "state-normal";
    case EveModel::StateTracking: return "state-tracking";
  }
  return "none";
}

}  // namespace

std::string scheme_name(Scheme scheme) {
  return scheme == Scheme::FlipKLJN ? "flip" : "kljn";
}

ReportRow row_from_report(const ExperimentReport& report) {
  ReportRow row;
  row.scheme = scheme_name(report.config.scheme);
  row.detector = detector_name(report.config.detector);
  row.alpha = report.config.alpha;
  row.samples = report.config.samples;
  row.beta = report.thresholds.beta;
  row.kappa = report.thresholds.kappa;
  row.eta = report.thresholds.eta;
  row.xi = report.thresholds.xi;
  row.snr_db_v = report.config.channels.voltage_snr_db.value_or(kInf);
  row.snr_db_i = report.config.channels.current_snr_db.value_or(kInf);
  row.exchanges = report.exchanges;
  row.seed = report.config.master_seed;
  row.ber = report.ber;
  row.ber_ci_low = report.ber_ci_low;
  row.ber_ci_high = report.ber_ci_high;
  row.discarded_pct = report.discarded_percentage;
  row.mismatch_episodes = report.mismatch_episodes;
  row.mean_episode_len = report.mean_episode_length;
  row.eve_acc_overall = report.eve_accuracy_overall;
  row.eve_acc_nonintermediate = report.eve_accuracy_nonintermediate;
  row.analytic_pb = report.analytic_pb;
  return row;
}

static const char* kHeader =
    "scheme,detector,alpha,N,beta,kappa,eta,xi,snr_db_v,snr_db_i,exchanges,seed,ber,"
    "ber_ci_low,ber_ci_high,discarded_pct,mismatch_episodes,mean_episode_len,"
    "eve_acc_overall,eve_acc_nonintermediate,analytic_pb";

void emit_rows(const std::vector<ReportRow>& rows, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Csv) {
    out << kHeader << '\n';
    for (const auto& r : rows) {
      out << r.scheme << ',' << r.detector << ',' << format_float(r.alpha) << ','
          << r.samples << ',' << format_float(r.beta) << ',' << format_float(r.kappa)
          << ',' << format_float(r.eta) << ',' << format_float(r.xi) << ','
          << format_float(r.snr_db_v) << ',' << format_float(r.snr_db_i) << ','
          << r.exchanges << ',' << r.seed << ',' << format_float(r.ber) << ','
          << format_float(r.ber_ci_low) << ',' << format_float(r.ber_ci_high) << ','
          << format_float(r.discarded_pct) << ',' << r.mismatch_episodes << ','
          << format_float(r.mean_episode_len) << ',' << format_float(r.eve_acc_overall)
          << ',' << format_float(r.eve_acc_nonintermediate) << ','
          << format_float(r.analytic_pb) << '\n';
    }
    return;
  }
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["scheme"] = r.scheme;
    j["detector"] = r.detector;
    j["alpha"] = r.alpha;
    j["N"] = r.samples;
    j["beta"] = r.beta;
    j["kappa"] = r.kappa;
    j["eta"] = r.eta;
    j["xi"] = r.xi;
    j["snr_db_v"] = json_number(r.snr_db_v);
    j["snr_db_i"] = json_number(r.snr_db_i);
    j["exchanges"] = r.exchanges;
    j["seed"] = r.seed;
    j["ber"] = json_number(r.ber);
    j["ber_ci_low"] = json_number(r.ber_ci_low);
    j["ber_ci_high"] = json_number(r.ber_ci_high);
    j["discarded_pct"] = json_number(r.discarded_pct);
    j["mismatch_episodes"] = r.mismatch_episodes;
    j["mean_episode_len"] = json_number(r.mean_episode_len);
    j["eve_acc_overall"] = json_number(r.eve_acc_overall);
    j["eve_acc_nonintermediate"] = json_number(r.eve_acc_nonintermediate);
    j["analytic_pb"] = json_number(r.analytic_pb);
    out << j.dump() << '\n';
  }
}

void write_dataset(const std::vector<ReportRow>& rows, OutputFormat format,
                   const std::string& path) {
  if (path.empty() || path == "-") {
    emit_rows(rows, format, std::cout);
    if (!std::cout) throw OutputIoError("failed writing dataset to stdout");
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw OutputIoError("cannot open output file: " + path);
  emit_rows(rows, format, out);
  out.flush();
  if (!out) throw OutputIoError("failed writing dataset: " + path);
}

ThresholdSet resolve_with_cache(double alpha, int samples, DetectorKind detector,
                                const std::string& cache_path, bool use_cache) {
  std::vector<ThresholdCacheEntry> entries;
  if (!cache_path.empty()) entries = load_threshold_cache(cache_path);
  if (use_cache) {
    if (const auto hit = cache_lookup(entries, alpha, samples, detector)) {
      return hit->thresholds;
    }
  }
  const ThresholdSet resolved = resolve_thresholds(alpha, samples, detector);
  if (!cache_path.empty()) {
    ThresholdCacheEntry entry;
    entry.alpha = alpha;
    entry.samples = samples;
    entry.detector = detector;
    entry.thresholds = resolved;
    entry.objective =
        total_bep(AnalyticInputs{alpha, resolved.beta, resolved.kappa, samples});
    std::erase_if(entries, [&](const ThresholdCacheEntry& e) {
      return e.alpha == alpha && e.samples == samples && e.detector == detector;
    });
    entries.push_back(entry);
    try {
      save_threshold_cache(cache_path, entries);
    } catch (const std::exception&) {
      // A read-only cache location only costs recomputation next time.
    }
  }
  return resolved;
}

namespace {

// ---------------------------------------------------------------------------
// Flat key=value config files, mirrored one-to-one by the long flags.
// Flags given on the command line override config values.
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::pair<std::string, std::string>> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError("cannot read config file: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigFileError("config file " + path + ": line " + std::to_string(lineno) +
                            " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigFileError("config file " + path + ": empty key on line " +
                            std::to_string(lineno));
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

struct ExperimentFlags {
  std::string scheme = "flip";
  std::string detector = "voltage";
  double alpha = 10.0;
  int samples = 100;
  std::uint64_t exchanges = 100000;
  std::uint64_t seed = 1;
  double boltzmann_k = 1.38e-23;
  double temperature_k = 300.0;
  double bandwidth_hz = 1e6;
  double r_low = 1000.0;
  double beta = 0.0, kappa = 0.0, eta = 0.0, xi = 0.0;
  double snr_db = kInf;
  double snr_db_v = kInf;
  double snr_db_i = kInf;
  std::string eve = "none";
  int workers = 0;
  bool exact_estimates = false;
  bool flip_on_flagged = false;
  std::uint64_t shard_size = 100000;
};

void add_experiment_options(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--scheme", f.scheme, "Key-exchange scheme: flip|kljn");
  cmd->add_option("--detector", f.detector, "Detector: voltage|current|jvcd|selective");
  cmd->add_option("--alpha", f.alpha, "Resistance ratio R_H/R_L (> 1)");
  cmd->add_option("--samples", f.samples, "Samples per channel per exchange (N)");
  cmd->add_option("--exchanges", f.exchanges, "Number of exchanges to simulate");
  cmd->add_option("--seed", f.seed, "Master seed (env FLIPKLJN_SEED is the fallback)");
  cmd->add_option("--boltzmann", f.boltzmann_k, "Boltzmann constant (J/K)");
  cmd->add_option("--temperature", f.temperature_k, "Temperature (K)");
  cmd->add_option("--bandwidth", f.bandwidth_hz, "Bandwidth (Hz)");
  cmd->add_option("--rl", f.r_low, "Low resistance R_L (ohm)");
  cmd->add_option("--beta", f.beta, "Voltage threshold beta (multiples of v_LL)");
  cmd->add_option("--kappa", f.kappa, "Voltage threshold kappa (multiples of v_LL)");
  cmd->add_option("--eta", f.eta, "Current threshold eta (multiples of i_HH)");
  cmd->add_option("--xi", f.xi, "Current threshold xi (multiples of i_HH)");
  cmd->add_option("--snr-db", f.snr_db, "Measurement SNR in dB for both channels");
  cmd->add_option("--snr-db-v", f.snr_db_v, "Voltage-channel measurement SNR in dB");
  cmd->add_option("--snr-db-i", f.snr_db_i, "Current-channel measurement SNR in dB");
  cmd->add_option("--eve", f.eve, "Eavesdropper: none|level|state-normal|state-tracking");
  cmd->add_option("--workers", f.workers, "Worker threads (0 = hardware concurrency)");
  cmd->add_flag("--exact-estimates", f.exact_estimates,
                "Replace variance estimates by the exact level values");
  cmd->add_flag("--flip-on-flagged", f.flip_on_flagged,
                "Let flagged exchanges drive state flips from the voltage decision");
  cmd->add_option("--shard-size", f.shard_size, "Exchanges per deterministic shard");
}

struct OutputFlags {
  std::string out = "-";
  std::string format = "csv";
  std::string cache;
  bool no_cache = false;
};

void add_output_options(CLI::App* cmd, OutputFlags& f, bool with_cache) {
  cmd->add_option("--out", f.out, "Output path ('-' = stdout)");
  cmd->add_option("--format", f.format, "Output format: csv|json-lines");
  if (with_cache) {
    cmd->add_option("--cache", f.cache,
                    "Threshold cache file (default: threshold_cache.csv beside --out)");
    cmd->add_flag("--no-cache", f.no_cache, "Force threshold recomputation");
  }
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json-lines" || name == "jsonl") return OutputFormat::JsonLines;
  throw std::invalid_argument("unknown format '" + name + "' (expected csv|json-lines)");
}

std::string default_cache_path(const OutputFlags& out) {
  if (!out.cache.empty()) return out.cache;
  if (out.out.empty() || out.out == "-") return "threshold_cache.csv";
  const std::filesystem::path p(out.out);
  return (p.has_parent_path() ? p.parent_path() / "threshold_cache.csv"
                              : std::filesystem::path("threshold_cache.csv"))
      .string();
}

ExperimentConfig config_from_flags(const ExperimentFlags& f, const OutputFlags& out) {
  ExperimentConfig c;
  c.scheme = parse_scheme(f.scheme);
  c.detector = parse_detector(f.detector);
  c.alpha = f.alpha;
  c.samples = f.samples;
  c.exchanges = f.exchanges;
  c.master_seed = f.seed;
  c.boltzmann_k = f.boltzmann_k;
  c.temperature_k = f.temperature_k;
  c.bandwidth_hz = f.bandwidth_hz;
  c.r_low_ohm = f.r_low;
  c.eve = parse_eve(f.eve);
  c.workers = f.workers;
  c.estimate_mode = f.exact_estimates ? EstimateMode::Exact : EstimateMode::Sampled;
  c.flip_on_flagged = f.flip_on_flagged;
  c.shard_size = f.shard_size;
  if (std::isfinite(f.snr_db)) {
    c.channels.voltage_snr_db = f.snr_db;
    c.channels.current_snr_db = f.snr_db;
  }
  if (std::isfinite(f.snr_db_v)) c.channels.voltage_snr_db = f.snr_db_v;
  if (std::isfinite(f.snr_db_i)) c.channels.current_snr_db = f.snr_db_i;

  const bool any_thr = f.beta > 0 || f.kappa > 0 || f.eta > 0 || f.xi > 0;
  if (any_thr) {
    if (!(f.beta > 0 && f.kappa > 0)) {
      throw std::invalid_argument("explicit thresholds need at least --beta and --kappa");
    }
    ThresholdSet t;
    t.beta = f.beta;
    t.kappa = f.kappa;
    t.eta = f.eta > 0 ? f.eta : f.beta;   // mirrored by default
    t.xi = f.xi > 0 ? f.xi : f.kappa;
    c.thresholds = t;
  } else {
    c.thresholds = resolve_with_cache(c.alpha, c.samples, c.detector,
                                      default_cache_path(out), !out.no_cache);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

struct PresetPoint {
  Scheme scheme;
  DetectorKind detector;
  double alpha;
  int samples;
  std::optional<double> snr_db;
};

struct PresetPlan {
  std::vector<PresetPoint> points;
  std::uint64_t default_exchanges = 1000000;
};

PresetPlan build_preset(const std::string& id, const std::vector<double>& alphas) {
  PresetPlan plan;
  const std::vector<std::pair<Scheme, DetectorKind>> combos = {
      {Scheme::ClassicalKLJN, DetectorKind::VoltageOnly},
      {Scheme::ClassicalKLJN, DetectorKind::JVCD},
      {Scheme::FlipKLJN, DetectorKind::VoltageOnly},
      {Scheme::FlipKLJN, DetectorKind::JVCD},
  };
  const std::vector<double> snr_grid = {6, 8, 10, 12, 14, 16, 18, 20};

  if (id == "fig4" || id == "fig4_ber_vs_N") {
    for (const auto& [scheme, detector] : combos) {
      for (int n : {10, 15, 20, 25, 30, 40, 50, 60, 75, 100}) {
        plan.points.push_back({scheme, detector, 10.0, n, std::nullopt});
      }
    }
    plan.default_exchanges = 1000000;
    return plan;
  }
  if (id == "fig5" || id == "fig5_ber_vs_alpha") {
    for (const auto& [scheme, detector] : combos) {
      for (int n : {100, 200}) {
        for (double a : {5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0}) {
          plan.points.push_back({scheme, detector, a, n, std::nullopt});
        }
      }
    }
    plan.default_exchanges = 1000000;
    return plan;
  }
  if (id == "fig6" || id == "fig6_ber_vs_snr") {
    const std::vector<double> alpha_list = alphas.empty() ? std::vector<double>{10.0} : alphas;
    for (Scheme scheme : {Scheme::ClassicalKLJN, Scheme::FlipKLJN}) {
      for (double a : alpha_list) {
        for (double snr : snr_grid) {
          plan.points.push_back({scheme, DetectorKind::JVCD, a, 100, snr});
        }
      }
    }
    plan.default_exchanges = 300000;
    return plan;
  }
  if (id == "fig8" || id == "fig8_discard_vs_snr") {
    for (Scheme scheme : {Scheme::ClassicalKLJN, Scheme::FlipKLJN}) {
      for (double snr : snr_grid) {
        plan.points.push_back({scheme, DetectorKind::JVCD, 10.0, 100, snr});
      }
    }
    plan.default_exchanges = 300000;
    return plan;
  }
  throw std::invalid_argument("unknown figure preset '" + id +
                              "' (expected fig4|fig5|fig6|fig8)");
}

// ---------------------------------------------------------------------------
// Config-file pre-injection: values for options the user did not pass are
// appended as flags after the subcommand token.
// ---------------------------------------------------------------------------

struct Argv {
  std::vector<std::string> tokens;
};

Argv apply_config_file(int argc, const char* const* argv, const CLI::App& app) {
  Argv out;
  for (int i = 0; i < argc; ++i) out.tokens.emplace_back(argv[i]);

  // Locate the subcommand and the --config value.
  std::string subcommand;
  std::size_t sub_index = 0;
  std::string config_path;
  for (std::size_t i = 1; i < out.tokens.size(); ++i) {
    const std::string& t = out.tokens[i];
    if (subcommand.empty() && !t.empty() && t[0] != '-') {
      if (app.get_subcommand_no_throw(t) != nullptr) {
        subcommand = t;
        sub_index = i;
      }
      continue;
    }
    if (t == "--config" && i + 1 < out.tokens.size()) {
      config_path = out.tokens[i + 1];
    } else if (t.rfind("--config=", 0) == 0) {
      config_path = t.substr(9);
    }
  }
  if (config_path.empty()) return out;
  if (subcommand.empty()) {
    throw ConfigFileError("--config requires a subcommand");
  }

  const CLI::App* sub = app.get_subcommand_no_throw(subcommand);
  const auto pairs = load_config_file(config_path);

  std::set<std::string> given;
  for (const auto& t : out.tokens) {
    if (t.rfind("--", 0) == 0) {
      const auto eq = t.find('=');
      given.insert(eq == std::string::npos ? t : t.substr(0, eq));
    }
  }

  std::vector<std::string> injected;
  for (const auto& [key, value] : pairs) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) {
      throw ConfigFileError("config file " + config_path + ": unknown key '" + key + "'");
    }
    if (given.count(flag) > 0) continue; // command line wins
    injected.push_back(flag);
    if (opt->get_expected_min() > 0) injected.push_back(value);
  }
  out.tokens.insert(out.tokens.begin() + sub_index + 1, injected.begin(), injected.end());
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

int run_analytic(double alpha, int samples, double beta, double kappa,
                 const std::string& law_name, const OutputFlags& out) {
  TailLaw law;
  if (law_name == "clt") {
    law = TailLaw::CltGaussian;
  } else if (law_name == "exact") {
    law = TailLaw::ChiSquare;
  } else {
    throw std::invalid_argument("unknown law '" + law_name + "' (expected clt|exact)");
  }
  const AnalyticInputs inputs{alpha, beta, kappa, samples};
  const BepBreakdown b = bep_breakdown(inputs, law);

  std::ostringstream os;
  os << "alpha,N,beta,kappa,p1,p2,p3,p4,p5,p6,p7,p8,P_mm,P_bm,P_b\n";
  os << format_float(alpha) << ',' << samples << ',' << format_float(beta) << ','
     << format_float(kappa);
  for (double p : b.p) os << ',' << format_float(p);
  os << ',' << format_float(b.mismatch_probability) << ',' << format_float(b.match_bep)
     << ',' << format_float(b.total_bep) << '\n';

  if (out.out.empty() || out.out == "-") {
    std::cout << os.str();
    return kExitOk;
  }
  std::ofstream file(out.out, std::ios::trunc);
  if (!file) throw OutputIoError("cannot open output file: " + out.out);
  file << os.str();
  if (!file) throw OutputIoError("failed writing: " + out.out);
  return kExitOk;
}

int run_simulate(const ExperimentFlags& flags, const OutputFlags& out) {
  const ExperimentConfig config = config_from_flags(flags, out);
  const ExperimentReport report = run_trials(config);
  write_dataset({row_from_report(report)}, parse_format(out.format), out.out);
  return kExitOk;
}

int run_optimize(const ExperimentFlags& flags, const OutputFlags& out,
                 const std::string& channel, const std::string& objective,
                 std::uint64_t budget, bool detector_given) {
  OptimizationProblem problem;
  problem.alpha = flags.alpha;
  problem.samples = flags.samples;
  if (objective == "clt") {
    problem.objective = ObjectiveKind::AnalyticPbClt;
  } else if (objective == "exact") {
    problem.objective = ObjectiveKind::AnalyticPbExact;
  } else if (objective == "simulated") {
    problem.objective = ObjectiveKind::SimulatedBer;
    problem.simulated.scheme = parse_scheme(flags.scheme);
    problem.simulated.detector = detector_given
                                     ? parse_detector(flags.detector)
                                     : (channel == "current" ? DetectorKind::CurrentOnly
                                                             : DetectorKind::VoltageOnly);
    problem.simulated.trial_budget = budget;
    problem.simulated.seed = flags.seed;
  } else {
    throw std::invalid_argument("unknown objective '" + objective +
                                "' (expected clt|exact|simulated)");
  }
  if (std::isfinite(flags.snr_db)) {
    problem.channels.voltage_snr_db = flags.snr_db;
    problem.channels.current_snr_db = flags.snr_db;
  }
  if (std::isfinite(flags.snr_db_v)) problem.channels.voltage_snr_db = flags.snr_db_v;
  if (std::isfinite(flags.snr_db_i)) problem.channels.current_snr_db = flags.snr_db_i;

  OptimizationResult result;
  if (channel == "voltage") {
    result = optimize_voltage_thresholds(problem);
  } else if (channel == "current") {
    result = optimize_current_thresholds(problem);
  } else {
    throw std::invalid_argument("unknown channel '" + channel + "' (expected voltage|current)");
  }

  std::ostringstream os;
  os << "channel,alpha,N,objective,lower,upper,value,evaluations\n"
     << channel << ',' << format_float(flags.alpha) << ',' << flags.samples << ','
     << objective << ',' << format_float(result.lower) << ',' << format_float(result.upper)
     << ',' << format_float(result.objective_value) << ',' << result.evaluations << '\n';
  if (out.out.empty() || out.out == "-") {
    std::cout << os.str();
  } else {
    std::ofstream file(out.out, std::ios::trunc);
    if (!file) throw OutputIoError("cannot open output file: " + out.out);
    file << os.str();
    if (!file) throw OutputIoError("failed writing: " + out.out);
  }
  return kExitOk;
}

int run_figure(const std::string& preset, const std::vector<double>& alphas,
               const ExperimentFlags& flags, const OutputFlags& out,
               bool exchanges_given, bool samples_given) {
  PresetPlan plan = build_preset(preset, alphas);
  const std::string cache_path = default_cache_path(out);

  std::vector<ReportRow> rows;
  rows.reserve(plan.points.size());
  for (const auto& point : plan.points) {
    ExperimentConfig c;
    c.scheme = point.scheme;
    c.detector = point.detector;
    c.alpha = point.alpha;
    c.samples = samples_given ? flags.samples : point.samples;
    c.exchanges = exchanges_given ? flags.exchanges : plan.default_exchanges;
    c.master_seed = flags.seed;
    c.boltzmann_k = flags.boltzmann_k;
    c.temperature_k = flags.temperature_k;
    c.bandwidth_hz = flags.bandwidth_hz;
    c.r_low_ohm = flags.r_low;
    c.workers = flags.workers;
    c.shard_size = flags.shard_size;
    if (point.snr_db) {
      c.channels.voltage_snr_db = point.snr_db;
      c.channels.current_snr_db = point.snr_db;
    }
    c.thresholds = resolve_with_cache(c.alpha, c.samples, c.detector, cache_path,
                                      !out.no_cache);
    rows.push_back(row_from_report(run_trials(c)));
  }
  write_dataset(rows, parse_format(out.format), out.out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Simulator and analytic toolkit for noise-driven secure bit exchange"};
  app.require_subcommand(1);

  // analytic
  auto* analytic = app.add_subcommand(
      "analytic", "Evaluate the closed-form error chain for given thresholds");
  double a_alpha = 10.0;
  int a_samples = 100;
  double a_beta = 0.0, a_kappa = 0.0;
  std::string a_law = "clt";
  OutputFlags a_out;
  analytic->add_option("--alpha", a_alpha, "Resistance ratio (> 1)");
  analytic->add_option("--samples", a_samples, "Samples per exchange (N)");
  analytic->add_option("--beta", a_beta, "Lower threshold")->required();
  analytic->add_option("--kappa", a_kappa, "Upper threshold")->required();
  analytic->add_option("--law", a_law, "Estimator tail law: clt|exact");
  add_output_options(analytic, a_out, false);
  analytic->add_option("--config", "Flat key = value config file")->expected(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run one Monte Carlo experiment");
  ExperimentFlags s_flags;
  OutputFlags s_out;
  add_experiment_options(simulate, s_flags);
  add_output_options(simulate, s_out, true);
  simulate->add_option("--config", "Flat key = value config file")->expected(1);

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Optimize decision thresholds");
  ExperimentFlags o_flags;
  OutputFlags o_out;
  std::string o_channel = "voltage";
  std::string o_objective = "clt";
  std::uint64_t o_budget = 200000;
  add_experiment_options(optimize, o_flags);
  add_output_options(optimize, o_out, true);
  optimize->add_option("--channel", o_channel, "Threshold pair: voltage|current");
  optimize->add_option("--objective", o_objective, "Objective: clt|exact|simulated");
  optimize->add_option("--budget", o_budget, "Trial budget for the simulated objective");
  optimize->add_option("--config", "Flat key = value config file")->expected(1);

  // figure
  auto* figure = app.add_subcommand("figure", "Run a figure-reproduction preset");
  ExperimentFlags f_flags;
  OutputFlags f_out;
  std::string f_preset;
  std::vector<double> f_alphas;
  figure->add_option("--preset", f_preset, "fig4|fig5|fig6|fig8")->required();
  figure->add_option("--alphas", f_alphas, "Alpha list for the SNR sweep preset")
      ->delimiter(',');
  add_experiment_options(figure, f_flags);
  add_output_options(figure, f_out, true);
  figure->add_option("--config", "Flat key = value config file")->expected(1);

  std::vector<std::string> tokens;
  try {
    tokens = apply_config_file(argc, argv, app).tokens;
  } catch (const ConfigFileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  // Master-seed fallback from the environment, unless --seed was given and
  // only for subcommands that take a seed.
  if (const char* env_seed = std::getenv("FLIPKLJN_SEED")) {
    bool has_seed = false;
    const CLI::App* sub = nullptr;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (tokens[i] == "--seed" || tokens[i].rfind("--seed=", 0) == 0) has_seed = true;
      if (sub == nullptr && !tokens[i].empty() && tokens[i][0] != '-') {
        sub = app.get_subcommand_no_throw(tokens[i]);
      }
    }
    if (!has_seed && sub != nullptr && sub->get_option_no_throw("--seed") != nullptr) {
      tokens.push_back("--seed");
      tokens.push_back(env_seed);
    }
  }

  std::vector<const char*> cargv;
  cargv.reserve(tokens.size());
  for (const auto& t : tokens) cargv.push_back(t.c_str());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCliError;
  }

  try {
    if (analytic->parsed()) return run_analytic(a_alpha, a_samples, a_beta, a_kappa, a_law, a_out);
    if (simulate->parsed()) return run_simulate(s_flags, s_out);
    if (optimize->parsed()) {
      return run_optimize(o_flags, o_out, o_channel, o_objective, o_budget,
                          optimize->count("--detector") > 0);
    }
    if (figure->parsed()) {
      const bool exchanges_given = figure->count("--exchanges") > 0;
      const bool samples_given = figure->count("--samples") > 0;
      return run_figure(f_preset, f_alphas, f_flags, f_out, exchanges_given, samples_given);
    }
  } catch (const ConfigFileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const OutputIoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParamError;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParamError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitCliError;
}

}  // namespace flipkljn::cli
