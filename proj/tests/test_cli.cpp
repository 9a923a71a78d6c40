#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doseresp/cli.hpp"
#include "doseresp/data.hpp"
#include "doseresp/hill.hpp"

namespace fs = std::filesystem;
using namespace doseresp;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("doseresp_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

fs::path synthetic_input(const fs::path& dir, int records = 71, unsigned seed = 1) {
  const auto p = dir / "data.csv";
  spit(p, serialize_trials(synthesize(records, -14.03, 9.39, seed)));
  return p;
}

const std::vector<std::string> kQuick{"--iters", "1000", "--chains", "2"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"sample", "--out-dir", "x"}).code == cli::kExitUsage);
  CHECK(run_cli({"sample", "--input", "/nonexistent.csv", "--out-dir",
                 scratch("missing").string()})
            .code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  const auto dir = scratch("usage");
  const auto input = synthetic_input(dir);
  CHECK(run_cli({"sample", "--input", input.string(), "--out-dir", (dir / "o").string(),
                 "--model", "nope"})
            .code == cli::kExitUsage);
  CHECK(run_cli({"sample", "--input", input.string(), "--out-dir", (dir / "o").string(),
                 "--prior-alpha", "cauchy(0,1)"})
            .code == cli::kExitUsage);
  CHECK(run_cli({"sample", "--input", input.string(), "--out-dir", (dir / "o").string(),
                 "--warmup-frac", "1.5"})
            .code == cli::kExitUsage);
}

TEST_CASE("summarize") {
  const auto dir = scratch("summarize");
  const auto input = synthetic_input(dir, 40, 3);
  const auto r = run_cli({"summarize", "--input", input.string(), "--out-dir", (dir / "o").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(slurp(dir / "o" / "summary.csv") == summary_csv(summarize(load_trials(input))));
  CHECK(count(slurp(dir / "o" / "survival_ratio.svg"), "<circle") == 40);
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  for (const auto& f : manifest["outputs"]) CHECK(fs::exists(dir / "o" / f.get<std::string>()));
  CHECK(manifest["input"]["sha256"].get<std::string>().size() == 64);
}

TEST_CASE("invalid rows exit 2 and name the line") {
  const auto dir = scratch("invalid");
  spit(dir / "bad.csv", "dosage,total,improved\n1.0,10,3\n1.2,10,11\n");
  const auto r = run_cli({"summarize", "--input", (dir / "bad.csv").string(), "--out-dir",
                          (dir / "o").string()});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.find("line 3") != std::string::npos);
  spit(dir / "garbage.csv", "dosage,total,improved\n1.0,ten,3\n");
  CHECK(run_cli({"sample", "--input", (dir / "garbage.csv").string(), "--out-dir",
                 (dir / "o").string()})
            .code == cli::kExitData);
}

TEST_CASE("sample writes draws, summaries and plots") {
  const auto dir = scratch("sample");
  const auto input = synthetic_input(dir);
  const auto out = dir / "o";
  const auto r = run_cli(cat({"sample", "--input", input.string(), "--out-dir", out.string(),
                              "--seed", "4"},
                             kQuick));
  REQUIRE(r.code == cli::kExitOk);
  const auto draws = slurp(out / "draws.csv");
  CHECK(draws.rfind("chain,iteration,divergent,alpha,beta\n", 0) == 0);
  CHECK(count(draws, "\n") == 1 + 2 * 500);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["parameters"][0]["name"] == "alpha");
  CHECK(summary["parameters"][1]["name"] == "beta");
  CHECK(summary["converged"] == true);
  const auto table = slurp(out / "summary.csv");
  CHECK(table.find("\nalpha,") != std::string::npos);
  CHECK(table.find("\nbeta,") != std::string::npos);
  CHECK(fs::exists(out / "density_alpha.svg"));
  CHECK(count(slurp(out / "trace_beta.svg"), "<polyline") == 2);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seed"] == 4);
  for (const auto& f : manifest["outputs"]) CHECK(fs::exists(out / f.get<std::string>()));
}

TEST_CASE("a single chain still gets split diagnostics") {
  const auto dir = scratch("single");
  const auto input = synthetic_input(dir);
  const auto r = run_cli({"sample", "--input", input.string(), "--out-dir", (dir / "o").string(),
                          "--chains", "1", "--iters", "2000", "--seed", "9"});
  CHECK(r.code == cli::kExitOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "o" / "summary.json"));
  CHECK(summary["parameters"][0]["split_rhat"].is_number());
}

TEST_CASE("outputs are byte-identical for a fixed seed") {
  const auto dir = scratch("determinism");
  const auto input = synthetic_input(dir);
  for (const auto& o : {"a", "b"}) {
    REQUIRE(run_cli(cat({"sample", "--input", input.string(), "--out-dir", (dir / o).string(),
                         "--seed", "21"},
                        kQuick))
                .code == cli::kExitOk);
  }
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename().string();
    if (name == "timing.json") continue;
    INFO(name);
    CHECK(slurp(entry.path()) == slurp(dir / "b" / name));
  }
}

TEST_CASE("DOSERESP_SEED is the fallback seed") {
  const auto dir = scratch("envseed");
  const auto input = synthetic_input(dir);
  setenv("DOSERESP_SEED", "33", 1);
  REQUIRE(run_cli(cat({"sample", "--input", input.string(), "--out-dir", (dir / "env").string()},
                      kQuick))
              .code == cli::kExitOk);
  REQUIRE(run_cli(cat({"sample", "--input", input.string(), "--out-dir", (dir / "flag").string(),
                       "--seed", "33"},
                      kQuick))
              .code == cli::kExitOk);
  REQUIRE(run_cli(cat({"sample", "--input", input.string(), "--out-dir", (dir / "other").string(),
                       "--seed", "34"},
                      kQuick))
              .code == cli::kExitOk);
  setenv("DOSERESP_SEED", "not-a-number", 1);
  CHECK(run_cli(cat({"sample", "--input", input.string(), "--out-dir", (dir / "bad").string()},
                    kQuick))
            .code == cli::kExitUsage);
  unsetenv("DOSERESP_SEED");
  CHECK(slurp(dir / "env" / "draws.csv") == slurp(dir / "flag" / "draws.csv"));
  CHECK(slurp(dir / "env" / "draws.csv") != slurp(dir / "other" / "draws.csv"));
  CHECK(nlohmann::json::parse(slurp(dir / "env" / "manifest.json"))["seed"] == 33);
}

TEST_CASE("priors-sweep") {
  const auto dir = scratch("sweep");
  const auto input = synthetic_input(dir);
  spit(dir / "sweep.json", R"j({"priors": ["normal(0,20)", "flat", "normal(0,1)"]})j");
  const auto r = run_cli(cat({"priors-sweep", "--input", input.string(), "--out-dir",
                              (dir / "o").string(), "--sweep-config", (dir / "sweep.json").string(),
                              "--seed", "2"},
                             kQuick));
  REQUIRE(r.code == cli::kExitOk);
  const auto csv = slurp(dir / "o" / "sweep.csv");
  CHECK(csv.rfind("prior,iterations,wall_time_s,alpha_mean,beta_mean,converged\n", 0) == 0);
  CHECK(count(csv, "\n") == 4);
  CHECK(csv.find("\n\"normal(0,1)\",1000,") != std::string::npos);
  const auto table = nlohmann::json::parse(slurp(dir / "o" / "sweep.json"))["rows"];
  REQUIRE(table.size() == 3);
  const double flat = table[1]["alpha_mean"], tight = table[2]["alpha_mean"];
  CHECK(std::abs(tight) < 0.8 * std::abs(flat));

  spit(dir / "empty.json", R"j({"priors": []})j");
  CHECK(run_cli({"priors-sweep", "--input", input.string(), "--out-dir", (dir / "e").string(),
                 "--sweep-config", (dir / "empty.json").string()})
            .code == cli::kExitUsage);
  spit(dir / "beta.json", R"j({"priors": ["normal(0,20)", "Beta(0.5,0.5)"]})j");
  const auto b = run_cli({"priors-sweep", "--input", input.string(), "--out-dir",
                          (dir / "e").string(), "--sweep-config", (dir / "beta.json").string()});
  CHECK(b.code == cli::kExitUsage);
  CHECK(b.err.find("beta") != std::string::npos);
}

TEST_CASE("compare favours the generating family") {
  const auto dir = scratch("compare");
  SUBCASE("logistic data") {
    const auto input = synthetic_input(dir, 71, 5);
    const auto r = run_cli(cat({"compare", "--input", input.string(), "--out-dir",
                                (dir / "o").string(), "--seed", "3"},
                               kQuick));
    REQUIRE(r.code == cli::kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "o" / "compare.json"));
    CHECK(j["weighted_residual"]["bayesian"].get<double>() <=
          j["weighted_residual"]["hill"].get<double>());
    const auto svg = slurp(dir / "o" / "compare.svg");
    CHECK(count(svg, "<circle") == 71);
    CHECK(count(svg, "<polyline") == 2);
  }
  SUBCASE("Hill data") {
    const HillFit truth = hill_from_parameters(0.8, 1.3, 3.0);
    std::vector<TrialRecord> recs;
    for (int k = 0; k < 60; ++k) {
      const double d = 0.3 + 3.7 * k / 59.0;
      recs.push_back({d, 200, static_cast<int>(std::lround(200 * hill_response(d, truth)))});
    }
    spit(dir / "hill.csv", serialize_trials(Dataset(recs)));
    const auto r = run_cli(cat({"compare", "--input", (dir / "hill.csv").string(), "--out-dir",
                                (dir / "o").string(), "--seed", "3"},
                               kQuick));
    REQUIRE(r.code == cli::kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "o" / "compare.json"));
    CHECK(j["weighted_residual"]["hill"].get<double>() <=
          j["weighted_residual"]["bayesian"].get<double>());
  }
}

TEST_CASE("oracle") {
  const auto dir = scratch("oracle");
  const auto input = synthetic_input(dir);
  SUBCASE("flat priors agree with the grid") {
    const auto r = run_cli(cat({"oracle", "--input", input.string(), "--out-dir",
                                (dir / "o").string(), "--prior-alpha", "flat", "--prior-beta",
                                "flat", "--seed", "6", "--grid-resolution", "256"},
                               kQuick));
    REQUIRE(r.code == cli::kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "o" / "oracle.json"));
    CHECK(j["agreement_ratio"]["alpha"].get<double>() <= 4.0);
    CHECK(j["agreement_ratio"]["beta"].get<double>() <= 4.0);
    CHECK(slurp(dir / "o" / "grid.csv").rfind("alpha_lo,alpha_hi,beta_lo,beta_hi,mass\n", 0) == 0);
  }
  SUBCASE("conjugate proportion") {
    const auto r = run_cli(cat({"oracle", "--model", "proportion", "--n", "4", "--total", "20",
                                "--out-dir", (dir / "p").string(), "--seed", "6"},
                               kQuick));
    REQUIRE(r.code == cli::kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "p" / "oracle.json"));
    CHECK(std::abs(j["quadrature"]["mean"].get<double>() - 5.0 / 22.0) < 1e-4);
  }
  SUBCASE("errors") {
    CHECK(run_cli({"oracle", "--model", "hier_ncp", "--input", input.string(), "--out-dir",
                   (dir / "x").string()})
              .code == cli::kExitUsage);
    const auto r = run_cli({"oracle", "--input", input.string(), "--out-dir",
                            (dir / "x").string(), "--alpha-bounds", "100,200", "--beta-bounds",
                            "100,200"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("widen the bounds") != std::string::npos);
  }
}

TEST_CASE("convergence failure exits 3 and still writes outputs") {
  const auto dir = scratch("nonconverged");
  const auto input = synthetic_input(dir);
  // Too few iterations for split-Rhat to settle under a tiny trajectory.
  const auto r = run_cli({"sample", "--input", input.string(), "--out-dir", (dir / "o").string(),
                          "--iters", "40", "--trajectory-length", "0.01", "--seed", "1"});
  CHECK(r.code == cli::kExitConvergence);
  CHECK(r.err.find("split_rhat") != std::string::npos);
  CHECK(fs::exists(dir / "o" / "manifest.json"));
  CHECK(nlohmann::json::parse(slurp(dir / "o" / "manifest.json"))["exit_code"] == 3);
}

TEST_CASE("synthesize") {
  const auto dir = scratch("synth");
  REQUIRE(run_cli({"synthesize", "--out-dir", (dir / "o").string(), "--records", "30", "--alpha",
                   "-14.03", "--beta", "9.39", "--seed", "8"})
              .code == cli::kExitOk);
  CHECK(load_trials(dir / "o" / "data.csv") == synthesize(30, -14.03, 9.39, 8));
  REQUIRE(run_cli({"synthesize", "--out-dir", (dir / "h").string(), "--records", "30",
                   "--sigma-alpha", "0.05", "--sigma-beta", "0.05", "--seed", "8"})
              .code == cli::kExitOk);
  CHECK(load_trials(dir / "h" / "data.csv") ==
        synthesize_hierarchical(30, -14.03, 9.39, 0.05, 0.05, 8));
}
