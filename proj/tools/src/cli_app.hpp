#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "flipkljn/harness.hpp"

// Command-line front end: experiment configuration parsing (flags plus flat
// key=value config files), threshold-cache resolution, dispatch to the
// harness/analytics/optimizer, and CSV / JSON-lines dataset emission.

namespace flipkljn::cli {

// Exit codes: 0 success, 2 unknown flag / command-line parse error,
// 3 unreadable or invalid config file, 4 invalid parameter combination,
// 5 output I/O failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCliError = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitParamError = 4;
inline constexpr int kExitIoError = 5;

struct ConfigFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutputIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, JsonLines };

// One dataset row; the field order is the fixed output schema.
struct ReportRow {
  std::string scheme;
  std::string detector;
  double alpha = 0.0;
  int samples = 0;
  double beta = 0.0, kappa = 0.0, eta = 0.0, xi = 0.0;
  double snr_db_v = 0.0, snr_db_i = 0.0; // +inf for an ideal channel
  std::uint64_t exchanges = 0;
  std::uint64_t seed = 0;
  double ber = 0.0, ber_ci_low = 0.0, ber_ci_high = 0.0;
  double discarded_pct = 0.0;
  std::uint64_t mismatch_episodes = 0;
  double mean_episode_len = 0.0;
  double eve_acc_overall = 0.0, eve_acc_nonintermediate = 0.0;
  double analytic_pb = 0.0;
};

ReportRow row_from_report(const ExperimentReport& report);

void emit_rows(const std::vector<ReportRow>& rows, OutputFormat format, std::ostream& out);

// Writes a dataset to `path` ("-" = stdout). Throws OutputIoError on failure.
void write_dataset(const std::vector<ReportRow>& rows, OutputFormat format,
                   const std::string& path);

// Resolves thresholds through the plain-text cache file keyed by
// (alpha, N, detector). An empty cache path disables persistence; use_cache
// false forces recomputation (the fresh values still refresh the cache).
ThresholdSet resolve_with_cache(double alpha, int samples, DetectorKind detector,
                                const std::string& cache_path, bool use_cache);

std::string scheme_name(Scheme scheme);

// Entry point used by main() and by the tests.
int run(int argc, const char* const* argv);

}  // namespace flipkljn::cli
