#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"
#include "flipkljn/analytics.hpp"

namespace fs = std::filesystem;
using namespace flipkljn;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("flipkljn");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

int run_cli_capture(const std::vector<std::string>& args, std::string& err) {
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  const int code = run_cli(args);
  std::cerr.rdbuf(old);
  err = captured.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "flipkljn_cli_tests";
  fs::create_directories(dir);
  return dir;
}

const std::string kExpectedHeader =
    "scheme,detector,alpha,N,beta,kappa,eta,xi,snr_db_v,snr_db_i,exchanges,seed,ber,"
    "ber_ci_low,ber_ci_high,discarded_pct,mismatch_episodes,mean_episode_len,"
    "eve_acc_overall,eve_acc_nonintermediate,analytic_pb";

}  // namespace

TEST_CASE("simulate writes the fixed CSV schema") {
  const auto out = temp_dir() / "sim.csv";
  const int code = run_cli({"simulate", "--scheme", "flip", "--detector", "jvcd", "--alpha",
                            "10", "--samples", "20", "--exchanges", "5000", "--seed", "42",
                            "--out", out.string()});
  CHECK(code == cli::kExitOk);
  const auto lines = split(slurp(out), '\n');
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == kExpectedHeader);
  const auto fields = split(lines[1], ',');
  REQUIRE(fields.size() == 21);
  CHECK(fields[0] == "flip");
  CHECK(fields[1] == "jvcd");
  CHECK(fields[2] == "10");
  CHECK(fields[3] == "20");
  CHECK(fields[8] == "inf"); // ideal channels
  CHECK(fields[10] == "5000");
  CHECK(fields[11] == "42");
}

TEST_CASE("analytic subcommand prints the error chain row") {
  const auto out = temp_dir() / "analytic.csv";
  const int code = run_cli({"analytic", "--alpha", "10", "--samples", "100", "--beta", "1.4",
                            "--kappa", "4", "--out", out.string()});
  CHECK(code == cli::kExitOk);
  const auto lines = split(slurp(out), '\n');
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == "alpha,N,beta,kappa,p1,p2,p3,p4,p5,p6,p7,p8,P_mm,P_bm,P_b");
  const auto fields = split(lines[1], ',');
  REQUIRE(fields.size() == 15);
  const auto b = bep_breakdown(AnalyticInputs{10.0, 1.4, 4.0, 100});
  CHECK(std::stod(fields[4]) == doctest::Approx(b.p[0]).epsilon(1e-8));
  CHECK(std::stod(fields[12]) == doctest::Approx(b.mismatch_probability).epsilon(1e-8));
  CHECK(std::stod(fields[14]) == doctest::Approx(b.total_bep).epsilon(1e-8));
}

TEST_CASE("exit codes distinguish the failure classes") {
  std::string err;
  CHECK(run_cli_capture({"simulate", "--bogus"}, err) == cli::kExitCliError);
  CHECK(run_cli_capture({"simulate", "--config", "/does/not/exist.cfg"}, err) ==
        cli::kExitConfigError);

  CHECK(run_cli_capture({"simulate", "--alpha", "0.5", "--exchanges", "10"}, err) ==
        cli::kExitParamError);
  CHECK(err.find("alpha must be > 1") != std::string::npos);

  CHECK(run_cli_capture({"simulate", "--detector", "psychic", "--exchanges", "10"}, err) ==
        cli::kExitParamError);

  const auto out = fs::path("/nonexistent_dir_zzz") / "x.csv";
  CHECK(run_cli_capture({"simulate", "--exchanges", "10", "--samples", "5", "--out",
                         out.string()},
                        err) == cli::kExitIoError);
}

TEST_CASE("config file values are applied and flags override them") {
  const auto dir = temp_dir();
  const auto cfg = dir / "run.cfg";
  {
    std::ofstream f(cfg, std::ios::trunc);
    f << "# experiment configuration\n"
      << "alpha = 5\n"
      << "samples = 24\n"
      << "exchanges = 4000\n"
      << "seed = 77\n";
  }
  const auto out = dir / "cfg_run.csv";
  const int code = run_cli({"simulate", "--config", cfg.string(), "--alpha", "7", "--out",
                            out.string()});
  CHECK(code == cli::kExitOk);
  const auto fields = split(split(slurp(out), '\n')[1], ',');
  CHECK(fields[2] == "7");   // flag wins
  CHECK(fields[3] == "24");  // config applied
  CHECK(fields[10] == "4000");
  CHECK(fields[11] == "77");

  {
    std::ofstream f(cfg, std::ios::trunc);
    f << "unknown_key = 3\n";
  }
  std::string err;
  CHECK(run_cli_capture({"simulate", "--config", cfg.string()}, err) ==
        cli::kExitConfigError);
}

TEST_CASE("environment seed is the fallback master seed") {
  const auto dir = temp_dir();
  const auto out = dir / "env_seed.csv";
  setenv("FLIPKLJN_SEED", "12345", 1);
  CHECK(run_cli({"simulate", "--exchanges", "2000", "--samples", "10", "--out",
                 out.string()}) == cli::kExitOk);
  CHECK(split(split(slurp(out), '\n')[1], ',')[11] == "12345");
  // An explicit flag wins over the environment.
  CHECK(run_cli({"simulate", "--exchanges", "2000", "--samples", "10", "--seed", "9", "--out",
                 out.string()}) == cli::kExitOk);
  CHECK(split(split(slurp(out), '\n')[1], ',')[11] == "9");
  unsetenv("FLIPKLJN_SEED");
}

TEST_CASE("reruns with the same seed are byte-identical across worker counts") {
  const auto dir = temp_dir();
  const auto out1 = dir / "det1.csv";
  const auto out2 = dir / "det2.csv";
  const std::vector<std::string> common = {"simulate", "--scheme", "flip",  "--detector",
                                           "jvcd",     "--alpha",  "10",    "--samples",
                                           "15",       "--seed",   "31337", "--exchanges",
                                           "60000",    "--shard-size", "10000"};
  auto with = [&](const fs::path& out, const char* workers) {
    auto args = common;
    args.insert(args.end(), {"--workers", workers, "--out", out.string()});
    return run_cli(args);
  };
  CHECK(with(out1, "1") == cli::kExitOk);
  CHECK(with(out2, "8") == cli::kExitOk);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(with(out2, "1") == cli::kExitOk);
  CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("json-lines mirrors the CSV fields") {
  const auto dir = temp_dir();
  const auto csv = dir / "row.csv";
  const auto jsonl = dir / "row.jsonl";
  const std::vector<std::string> base = {"simulate", "--samples", "12", "--exchanges",
                                         "3000",     "--seed",    "8"};
  {
    auto args = base;
    args.insert(args.end(), {"--out", csv.string()});
    REQUIRE(run_cli(args) == cli::kExitOk);
  }
  {
    auto args = base;
    args.insert(args.end(), {"--format", "json-lines", "--out", jsonl.string()});
    REQUIRE(run_cli(args) == cli::kExitOk);
  }
  const auto header = split(split(slurp(csv), '\n')[0], ',');
  const auto object = nlohmann::json::parse(split(slurp(jsonl), '\n')[0]);
  REQUIRE(object.is_object());
  for (const auto& column : header) {
    CHECK(object.contains(column));
  }
  CHECK(object.size() == header.size());
  CHECK(object["seed"] == 8);
  CHECK(object["N"] == 12);
  CHECK(object["snr_db_v"].is_null()); // ideal channel renders as null
}

TEST_CASE("an empty dataset still carries the header") {
  std::ostringstream os;
  cli::emit_rows({}, cli::OutputFormat::Csv, os);
  CHECK(os.str() == kExpectedHeader + "\n");
}

TEST_CASE("figure presets produce the documented grid shapes") {
  const auto dir = temp_dir();
  const auto out4 = dir / "fig4.csv";
  CHECK(run_cli({"figure", "--preset", "fig4", "--exchanges", "400", "--seed", "2", "--out",
                 out4.string()}) == cli::kExitOk);
  auto lines = split(slurp(out4), '\n');
  CHECK(lines.size() == 1 + 40); // header + 4 combos x 10 sample counts

  const auto out8 = dir / "fig8.csv";
  CHECK(run_cli({"figure", "--preset", "fig8", "--exchanges", "400", "--seed", "2", "--out",
                 out8.string()}) == cli::kExitOk);
  lines = split(slurp(out8), '\n');
  CHECK(lines.size() == 1 + 16); // header + 2 schemes x 8 SNR points

  std::string err;
  CHECK(run_cli_capture({"figure", "--preset", "fig99", "--out", (dir / "x.csv").string()},
                        err) == cli::kExitParamError);
}

TEST_CASE("threshold cache is created, reused, and refreshable") {
  const auto dir = temp_dir() / "cache_case";
  fs::create_directories(dir);
  const auto out = dir / "run.csv";
  const auto cache = dir / "threshold_cache.csv";
  fs::remove(cache);

  const std::vector<std::string> args = {"simulate", "--samples", "18", "--exchanges", "1000",
                                         "--seed", "4", "--out", out.string()};
  REQUIRE(run_cli(args) == cli::kExitOk);
  CHECK(fs::exists(cache)); // written beside the output file
  const std::string cold = slurp(out);

  // Warm rerun resolves through the cache and reproduces the bytes.
  REQUIRE(run_cli(args) == cli::kExitOk);
  CHECK(slurp(out) == cold);

  // Forced recomputation also reproduces them.
  auto nocache = args;
  nocache.push_back("--no-cache");
  REQUIRE(run_cli(nocache) == cli::kExitOk);
  CHECK(slurp(out) == cold);
}

TEST_CASE("optimize subcommand reports a feasible optimum") {
  const auto out = temp_dir() / "opt.csv";
  CHECK(run_cli({"optimize", "--alpha", "10", "--samples", "50", "--channel", "voltage",
                 "--objective", "clt", "--out", out.string()}) == cli::kExitOk);
  const auto lines = split(slurp(out), '\n');
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == "channel,alpha,N,objective,lower,upper,value,evaluations");
  const auto fields = split(lines[1], ',');
  const double lower = std::stod(fields[4]);
  const double upper = std::stod(fields[5]);
  CHECK(lower > 1.0);
  CHECK(lower < 20.0 / 11.0);
  CHECK(upper > 20.0 / 11.0);
  CHECK(upper < 10.0);
}
