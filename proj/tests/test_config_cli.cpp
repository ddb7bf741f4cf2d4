#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "magsim/cli.hpp"
#include "magsim/config.hpp"
#include "magsim/riccati.hpp"
#include "magsim/scenarios.hpp"

using namespace magsim;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

struct Csv {
  std::vector<std::string> header_lines;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::string& path) {
  Csv csv;
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      csv.header_lines.push_back(line);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_columns) {
      csv.columns = cells;
      have_columns = true;
    } else {
      std::vector<double> row;
      for (const auto& c : cells) row.push_back(std::stod(c));
      csv.rows.push_back(row);
    }
  }
  return csv;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("empty config file yields the canonical defaults") {
  TempFile f("cfg_empty.tmp", "");
  ScenarioConfig cfg;
  parse_config_file(cfg, f.path);
  resolve_source(cfg);
  REQUIRE(cfg.source == ParamSource::kPhysical);
  REQUIRE(cfg.tau == 1e-8);
  REQUIRE(cfg.seed == 0);
  const EffectiveCouplings c = cfg.couplings();
  REQUIRE(c.kappa_sq() == Catch::Approx(1.83e6).epsilon(0.01));
  REQUIRE(c.eta == Catch::Approx(1.7577).epsilon(0.001));
}

TEST_CASE("flags override file values") {
  TempFile f("cfg_override.tmp",
             "# effective couplings\n"
             "kappa_sq = 1.83e6\n"
             "mu = 8.79e16\n"
             "decay = false\n");
  ScenarioConfig cfg;
  parse_config_file(cfg, f.path);
  apply_key(cfg, "kappa_sq", "2e6", "command line");
  resolve_source(cfg);
  REQUIRE(cfg.source == ParamSource::kEffective);
  REQUIRE(cfg.couplings().kappa_sq() == Catch::Approx(2e6));
}

TEST_CASE("mixing physical and effective keys is a conflict") {
  TempFile f("cfg_conflict.tmp",
             "atom_number = 1e12\n"
             "kappa_sq = 1.8e6\n"
             "mu = 8.8e16\n"
             "decay = false\n");
  ScenarioConfig cfg;
  parse_config_file(cfg, f.path);
  try {
    resolve_source(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("conflicting") != std::string::npos);
    REQUIRE(msg.find("kappa_sq") != std::string::npos);
    REQUIRE(msg.find("atom_number") != std::string::npos);
    REQUIRE(msg.find(":1") != std::string::npos);  // atom_number on line 1
    REQUIRE(msg.find(":2") != std::string::npos);  // kappa_sq on line 2
  }
}

TEST_CASE("config parse errors carry line numbers") {
  SECTION("unknown key") {
    TempFile f("cfg_unknown.tmp", "tau = 1e-8\n\nfoo = 1\n");
    ScenarioConfig cfg;
    try {
      parse_config_file(cfg, f.path);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find(":3") != std::string::npos);
      REQUIRE(std::string(e.what()).find("foo") != std::string::npos);
    }
  }
  SECTION("unparsable number") {
    TempFile f("cfg_badnum.tmp", "tau = fast\n");
    ScenarioConfig cfg;
    try {
      parse_config_file(cfg, f.path);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find(":1") != std::string::npos);
      REQUIRE(std::string(e.what()).find("fast") != std::string::npos);
    }
  }
  SECTION("missing equals sign") {
    TempFile f("cfg_noeq.tmp", "tau 1e-8\n");
    ScenarioConfig cfg;
    REQUIRE_THROWS_AS(parse_config_file(cfg, f.path), ConfigError);
  }
  SECTION("missing file") {
    ScenarioConfig cfg;
    REQUIRE_THROWS_AS(parse_config_file(cfg, "no_such_file.tmp"), ConfigError);
  }
}

TEST_CASE("effective source demands a complete coupling set") {
  SECTION("mu missing") {
    ScenarioConfig cfg;
    apply_key(cfg, "kappa_sq", "1e6", "command line");
    REQUIRE_THROWS_AS(resolve_source(cfg), ConfigError);
  }
  SECTION("decay enabled without eta") {
    ScenarioConfig cfg;
    apply_key(cfg, "kappa_sq", "1e6", "command line");
    apply_key(cfg, "mu", "8.8e16", "command line");
    REQUIRE_THROWS_AS(resolve_source(cfg), ConfigError);
  }
  SECTION("decay disabled works without eta") {
    ScenarioConfig cfg;
    apply_key(cfg, "kappa_sq", "1e6", "command line");
    apply_key(cfg, "mu", "8.8e16", "command line");
    apply_key(cfg, "decay", "false", "command line");
    REQUIRE_NOTHROW(resolve_source(cfg));
  }
}

TEST_CASE("value parsing details") {
  ScenarioConfig cfg;
  SECTION("booleans") {
    apply_key(cfg, "decay", "off", "x");
    REQUIRE_FALSE(cfg.decay);
    apply_key(cfg, "decay", "1", "x");
    REQUIRE(cfg.decay);
    REQUIRE_THROWS_AS(apply_key(cfg, "decay", "maybe", "x"), ConfigError);
  }
  SECTION("truth mode") {
    apply_key(cfg, "truth_mode", "innovation", "x");
    REQUIRE(cfg.truth_mode == TruthMode::kInnovationDraw);
    apply_key(cfg, "truth_mode", "ground-truth", "x");
    REQUIRE(cfg.truth_mode == TruthMode::kGroundTruth);
    REQUIRE_THROWS_AS(apply_key(cfg, "truth_mode", "psychic", "x"), ConfigError);
  }
  SECTION("inline comments and whitespace") {
    TempFile f("cfg_ws.tmp", "  tau =  2e-8   # fine\n");
    parse_config_file(cfg, f.path);
    REQUIRE(cfg.tau == 2e-8);
  }
}

TEST_CASE("derive-params output") {
  ScenarioConfig cfg;
  std::ostringstream out;
  write_derive_params(out, cfg);
  const std::string s = out.str();
  REQUIRE(s.find("kappa_sq = ") != std::string::npos);
  REQUIRE(s.find("(s pT)^-1") != std::string::npos);
  double kappa_sq = 0.0, mu = 0.0, eta = 0.0;
  REQUIRE(std::sscanf(s.c_str(), "kappa_sq = %lf s^-1\nmu = %lf (s pT)^-1\neta = %lf",
                      &kappa_sq, &mu, &eta) == 3);
  REQUIRE(kappa_sq == Catch::Approx(1.83e6).epsilon(0.01));
  REQUIRE(mu == Catch::Approx(8.79e4).epsilon(0.01));
  REQUIRE(eta == Catch::Approx(1.7577).epsilon(0.001));
}

TEST_CASE("variance subcommand writes the uncertainty curve") {
  const std::string out = "cli_variance.tmp.csv";
  const int rc = cli::run({"variance", "--no-decay", "--out", out});
  REQUIRE(rc == 0);
  const Csv csv = read_csv(out);
  fs::remove(out);

  REQUIRE(csv.columns ==
          std::vector<std::string>{"t_s", "deltaB_pT", "deltaB_analytic_pT",
                                   "jx_fraction"});
  bool has_seed = false, has_constants = false;
  for (const auto& h : csv.header_lines) {
    if (h.find("# seed = ") != std::string::npos) has_seed = true;
    if (h.find("hbar") != std::string::npos) has_constants = true;
  }
  REQUIRE(has_seed);
  REQUIRE(has_constants);

  const auto& last = csv.rows.back();
  REQUIRE(last[0] == Catch::Approx(1e-2));
  const EffectiveCouplings c = ScenarioConfig{}.couplings();
  const double want_pt =
      std::sqrt(analytic_variance(1e-12, c.kappa, c.mu, 1.0, last[0])) / 1e-12;
  REQUIRE(last[1] == Catch::Approx(want_pt).epsilon(5e-3));
  REQUIRE(last[3] == 1.0);  // no decay
}

TEST_CASE("variance subcommand appends the terminal measurement row") {
  const std::string out = "cli_sg.tmp.csv";
  const int rc = cli::run({"variance", "--no-decay", "--t-final", "1e-4",
                           "--sg-time", "1e-4", "--record-points", "20", "--out",
                           out});
  REQUIRE(rc == 0);
  const Csv csv = read_csv(out);
  fs::remove(out);
  const auto n = csv.rows.size();
  REQUIRE(csv.rows[n - 1][0] == csv.rows[n - 2][0]);  // same instant
  REQUIRE(csv.rows[n - 1][1] < csv.rows[n - 2][1]);   // spin readout helps
}

TEST_CASE("trajectory subcommand column layout follows the truth mode") {
  const std::string out = "cli_traj.tmp.csv";
  REQUIRE(cli::run({"trajectory", "--no-decay", "--t-final", "1e-6", "--seed",
                    "4", "--out", out}) == 0);
  Csv csv = read_csv(out);
  fs::remove(out);
  REQUIRE(csv.columns == std::vector<std::string>{"t_s", "B_mean_pT",
                                                  "deltaB_pT", "B_true_pT"});
  // B_true is constant down the column
  for (const auto& row : csv.rows) REQUIRE(row[3] == csv.rows[0][3]);

  REQUIRE(cli::run({"trajectory", "--no-decay", "--t-final", "1e-6",
                    "--truth-mode", "innovation", "--out", out}) == 0);
  csv = read_csv(out);
  fs::remove(out);
  REQUIRE(csv.columns ==
          std::vector<std::string>{"t_s", "B_mean_pT", "deltaB_pT"});
}

TEST_CASE("ensemble output is byte-identical across runs and thread counts") {
  const std::vector<std::string> base = {
      "ensemble", "--kappa-sq", "1.83e6", "--mu", "8.79e16", "--no-decay",
      "--t-final", "1e-6", "--n", "4", "--seed", "7", "--record-points", "10"};
  auto run_with = [&](const std::string& out, const char* threads) {
    std::vector<std::string> args = base;
    args.insert(args.end(), {"--threads", threads, "--out", out});
    REQUIRE(cli::run(args) == 0);
    const std::string bytes = slurp(out);
    fs::remove(out);
    return bytes;
  };
  const std::string a = run_with("cli_ens_a.tmp.csv", "1");
  const std::string b = run_with("cli_ens_b.tmp.csv", "1");
  const std::string c = run_with("cli_ens_c.tmp.csv", "2");
  REQUIRE_FALSE(a.empty());
  REQUIRE(a == b);
  REQUIRE(a == c);

  const std::string d = run_with("cli_ens_d.tmp.csv", "1");
  REQUIRE(a == d);
}

TEST_CASE("ensemble CSV carries the documented columns") {
  const std::string out = "cli_ens_cols.tmp.csv";
  REQUIRE(cli::run({"ensemble", "--no-decay", "--t-final", "1e-6", "--n", "4",
                    "--record-points", "5", "--out", out}) == 0);
  const Csv csv = read_csv(out);
  fs::remove(out);
  REQUIRE(csv.columns ==
          std::vector<std::string>{"t_s", "mse_pT2", "var_mean_pT2",
                                   "deltaB2_pT2", "ltv_residual_pT2"});
  REQUIRE(csv.rows.size() >= 4);
}

TEST_CASE("command line errors return nonzero") {
  REQUIRE(cli::run({"variance", "--no-such-flag"}) != 0);
  REQUIRE(cli::run({}) != 0);
  // conflicting sources via flags
  REQUIRE(cli::run({"variance", "--kappa-sq", "1e6", "--mu", "8e16",
                    "--atom-number", "1e12", "--no-decay"}) == 2);
}
