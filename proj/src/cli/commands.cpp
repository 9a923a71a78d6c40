#include "doseresp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "doseresp/conjugate.hpp"
#include "doseresp/data.hpp"
#include "doseresp/diagnostics.hpp"
#include "doseresp/hill.hpp"
#include "doseresp/model.hpp"
#include "doseresp/oracle.hpp"
#include "doseresp/sampler.hpp"
#include "doseresp/svg.hpp"
#include "output.hpp"

namespace doseresp::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Shared options

struct SamplerOptions {
  std::string model = "simple";
  std::string prior_alpha = "normal(0,20)";
  std::string prior_beta = "normal(0,20)";
  std::string prior_sigma = "half_normal(0,2)";
  int chains = 4;
  int iters = 4000;
  double warmup_frac = 0.5;
  double target_accept = 0.8;
  double trajectory_length = 2.0;
  unsigned long long seed = 1;
  CLI::Option* seed_option = nullptr;
};

void add_seed_flag(CLI::App* sub, SamplerOptions& o) {
  o.seed_option = sub->add_option("--seed", o.seed, "Base seed (fallback: DOSERESP_SEED, then 1)");
}

void add_sampler_flags(CLI::App* sub, SamplerOptions& o, bool with_model) {
  if (with_model)
    sub->add_option("--model", o.model, "simple, hier_centered or hier_ncp")
        ->check(CLI::IsMember({"simple", "hier_centered", "hier_ncp"}));
  sub->add_option("--prior-alpha", o.prior_alpha,
                  "Prior on alpha (mu_alpha for hierarchical models)");
  sub->add_option("--prior-beta", o.prior_beta,
                  "Prior on beta (mu_beta for hierarchical models)");
  if (with_model)
    sub->add_option("--prior-sigma", o.prior_sigma,
                    "Prior on sigma_alpha and sigma_beta (hierarchical models)");
  sub->add_option("--chains", o.chains)->check(CLI::PositiveNumber);
  sub->add_option("--iters", o.iters, "Iterations per chain, warmup included");
  sub->add_option("--warmup-frac", o.warmup_frac);
  sub->add_option("--target-accept", o.target_accept);
  sub->add_option("--trajectory-length", o.trajectory_length,
                  "Base integration time per transition");
  add_seed_flag(sub, o);
}

unsigned long long resolve_seed(const SamplerOptions& o) {
  if (o.seed_option && o.seed_option->count() > 0) return o.seed;
  if (const char* env = std::getenv("DOSERESP_SEED"); env && *env) {
    unsigned long long v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto res = std::from_chars(env, end, v);
    if (res.ec != std::errc() || res.ptr != end)
      throw UsageError(std::string("DOSERESP_SEED is not an unsigned integer: ") + env);
    return v;
  }
  return 1;
}

HmcConfig hmc_config(const SamplerOptions& o, unsigned long long seed) {
  HmcConfig c;
  c.chains = o.chains;
  c.total_iterations = o.iters;
  c.warmup_fraction = o.warmup_frac;
  c.target_accept = o.target_accept;
  c.base_trajectory_length = o.trajectory_length;
  c.seed = seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json config_json(const SamplerOptions& o, unsigned long long seed) {
  json j{{"model", o.model},
         {"prior_alpha", PriorSpec::parse(o.prior_alpha).to_string()},
         {"prior_beta", PriorSpec::parse(o.prior_beta).to_string()},
         {"chains", o.chains},
         {"iters", o.iters},
         {"warmup_frac", o.warmup_frac},
         {"target_accept", o.target_accept},
         {"trajectory_length", o.trajectory_length},
         {"seed", seed}};
  if (o.model != "simple") j["prior_sigma"] = PriorSpec::parse(o.prior_sigma).to_string();
  return j;
}

std::unique_ptr<ModelDensity> build_model(const SamplerOptions& o, const Dataset& ds) {
  const PriorSpec pa = PriorSpec::parse(o.prior_alpha);
  const PriorSpec pb = PriorSpec::parse(o.prior_beta);
  if (o.model == "simple") return std::make_unique<SimpleLrModel>(ds, pa, pb);
  HierPriors hp;
  hp.mu_alpha = pa;
  hp.mu_beta = pb;
  hp.sigma_alpha = hp.sigma_beta = PriorSpec::parse(o.prior_sigma);
  const auto param = o.model == "hier_ncp" ? Parameterization::ncp : Parameterization::centered;
  return std::make_unique<HierLrModel>(ds, param, hp);
}

Dataset load_input(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("cannot read input file " + path);
  return load_trials(path);
}

json input_json(const std::string& path) {
  return {{"path", path}, {"sha256", sha256_file(path)}};
}

// ---------------------------------------------------------------------------
// Sampling outputs

std::string draws_csv(const SampleRun& run) {
  std::string s = "chain,iteration,divergent";
  for (const auto& n : run.parameter_names) s += ',' + n;
  s += '\n';
  for (std::size_t c = 0; c < run.chains.size(); ++c) {
    const auto& ch = run.chains[c];
    for (std::size_t i = 0; i < ch.iterations(); ++i) {
      s += std::to_string(c + 1) + ',' + std::to_string(i + 1) + ',' +
           (ch.divergent[i] ? "1" : "0");
      for (std::size_t p = 0; p < ch.num_params; ++p) s += ',' + fmt(ch.at(i, p));
      s += '\n';
    }
  }
  return s;
}

std::string summary_table(const PosteriorSummary& s) {
  std::string out = "parameter,mean,sd,1st Qu.,Median,3rd Qu.,split_rhat,ess,mcse\n";
  for (const auto& p : s.parameters) {
    out += p.name + ',' + fmt(p.mean) + ',' + fmt(p.sd) + ',' + fmt(p.q25) + ',' +
           fmt(p.median) + ',' + fmt(p.q75) + ',' + fmt_opt(p.split_rhat) + ',' +
           fmt_opt(p.ess) + ',' + (p.ess ? fmt(p.mcse()) : "degenerate") + '\n';
  }
  return out;
}

json summary_json(const PosteriorSummary& s, const ConvergenceReport& r) {
  json params = json::array();
  for (const auto& p : s.parameters) {
    params.push_back({{"name", p.name},
                      {"mean", json_num(p.mean)},
                      {"sd", json_num(p.sd)},
                      {"q25", json_num(p.q25)},
                      {"median", json_num(p.median)},
                      {"q75", json_num(p.q75)},
                      {"split_rhat", json_opt(p.split_rhat)},
                      {"ess", json_opt(p.ess)},
                      {"mcse", p.ess ? json_num(p.mcse()) : json("degenerate")}});
  }
  return {{"parameters", params},
          {"divergences", s.divergence_count},
          {"total_draws", s.total_draws},
          {"divergent_fraction", s.divergent_fraction()},
          {"converged", r.converged},
          {"rhat_threshold", kRhatThreshold},
          {"max_divergent_fraction", kMaxDivergentFraction},
          {"failing_parameters", r.failing},
          {"too_many_divergences", r.too_many_divergences}};
}

json run_json(const SampleRun& run) {
  json chains = json::array();
  for (std::size_t c = 0; c < run.chains.size(); ++c) {
    const auto& ch = run.chains[c];
    double accept = 0.0, steps = 0.0;
    for (std::size_t i = 0; i < ch.iterations(); ++i) {
      accept += ch.accept_prob[i];
      steps += ch.leapfrog_steps[i];
    }
    const double n = std::max<double>(1.0, static_cast<double>(ch.iterations()));
    chains.push_back({{"chain", c + 1},
                      {"seed", chain_seed(run.config.seed, static_cast<int>(c))},
                      {"final_step_size", ch.final_step_size},
                      {"mass_diagonal", ch.mass_diagonal},
                      {"divergences", ch.divergence_count()},
                      {"mean_accept_prob", accept / n},
                      {"mean_leapfrog_steps", steps / n}});
  }
  return {{"parameter_names", run.parameter_names},
          {"warmup_iterations", run.config.warmup_iterations()},
          {"sampling_iterations", run.config.sampling_iterations()},
          {"max_leapfrog_steps", run.config.max_leapfrog_steps},
          {"divergence_threshold", run.config.divergence_threshold},
          {"chains", chains}};
}

std::vector<double> pooled(const SampleRun& run, std::size_t param) {
  std::vector<double> all;
  for (const auto& c : run.parameter_chains(param)) all.insert(all.end(), c.begin(), c.end());
  return all;
}

std::string density_svg(const SampleRun& run, std::size_t param) {
  const auto& name = run.parameter_names[param];
  SvgPlot plot("Posterior density of " + name, name, "density");
  const auto all = pooled(run, param);
  if (all.size() >= 10) plot.add_line(density_series(all, 200), color(0), "all chains");
  plot.include_y(0.0, 0.0);
  return plot.render();
}

std::string trace_svg(const SampleRun& run, std::size_t param) {
  const auto& name = run.parameter_names[param];
  SvgPlot plot("Trace of " + name, "iteration", name);
  const auto chains = run.parameter_chains(param);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    Points pts;
    pts.reserve(chains[c].size());
    for (std::size_t i = 0; i < chains[c].size(); ++i)
      pts.emplace_back(static_cast<double>(i + 1), chains[c][i]);
    plot.add_line(std::move(pts), color(c), "chain " + std::to_string(c + 1));
  }
  return plot.render();
}

std::vector<std::string> plotted_parameters(const std::string& model) {
  if (model == "simple") return {"alpha", "beta"};
  if (model == "proportion") return {"p"};
  return {"mu_a", "mu_b", "sigma_a", "sigma_b"};
}

struct SampleResult {
  SampleRun run;
  PosteriorSummary summary;
  ConvergenceReport report;
};

SampleResult sample_and_write(const ModelDensity& model, const HmcConfig& cfg,
                              const std::string& model_name, OutputDir& out,
                              const std::string& prefix = {}) {
  SampleResult r{run_chains(model, cfg), {}, {}};
  r.summary = summarize_run(r.run);
  r.report = check_convergence(r.summary);
  out.write(prefix + "draws.csv", draws_csv(r.run));
  out.write(prefix + "summary.csv", summary_table(r.summary));
  out.write_json(prefix + "summary.json", summary_json(r.summary, r.report));
  out.write_json(prefix + "run.json", run_json(r.run));
  for (const auto& name : plotted_parameters(model_name)) {
    const std::size_t k = r.run.parameter_index(name);
    out.write(prefix + "density_" + name + ".svg", density_svg(r.run, k));
    out.write(prefix + "trace_" + name + ".svg", trace_svg(r.run, k));
  }
  return r;
}

int report_convergence(const ConvergenceReport& r, const PosteriorSummary& s, std::ostream& err) {
  if (r.converged) return kExitOk;
  err << "convergence check failed:";
  if (!r.failing.empty()) {
    err << " split_rhat > " << kRhatThreshold << " for";
    for (const auto& n : r.failing) err << ' ' << n;
    err << ';';
  }
  if (r.too_many_divergences)
    err << " divergent fraction " << s.divergent_fraction() << " > " << kMaxDivergentFraction;
  err << '\n';
  return kExitConvergence;
}

std::string ratio_svg(const Dataset& ds) {
  SvgPlot plot("Survival ratio vs. dosage", "dosage", "survival ratio (n/N)");
  plot.add_markers(survival_ratios(ds), color(0));
  plot.include_y(0.0, 1.0);
  return plot.render();
}

// ---------------------------------------------------------------------------
// Commands

struct SummarizeArgs {
  std::string input, out_dir;
};

int cmd_summarize(const SummarizeArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  const Dataset ds = load_input(a.input);
  OutputDir dir(a.out_dir);
  dir.write("summary.csv", summary_csv(summarize(ds)));
  dir.write("survival_ratio.svg", ratio_svg(ds));
  dir.finish("summarize", {{"records", ds.size()}}, input_json(a.input), std::nullopt,
             seconds_since(start), kExitOk);
  out << summary_csv(summarize(ds));
  return kExitOk;
}

struct SampleArgs {
  std::string input, out_dir;
  SamplerOptions sampler;
};

int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const auto seed = resolve_seed(a.sampler);
  const HmcConfig cfg = hmc_config(a.sampler, seed);
  const json config = config_json(a.sampler, seed);
  const Dataset ds = load_input(a.input);
  const auto model = build_model(a.sampler, ds);
  OutputDir dir(a.out_dir);
  const auto r = sample_and_write(*model, cfg, a.sampler.model, dir);
  const int code = report_convergence(r.report, r.summary, err);
  dir.finish("sample", config, input_json(a.input), seed, seconds_since(start), code);
  for (const auto& name : plotted_parameters(a.sampler.model)) {
    const auto& p = r.summary.at(name);
    out << name << ": mean " << fmt(p.mean) << " sd " << fmt(p.sd) << " split_rhat "
        << fmt_opt(p.split_rhat) << " ess " << fmt_opt(p.ess) << '\n';
  }
  out << "divergences: " << r.summary.divergence_count << " of " << r.summary.total_draws << '\n';
  return code;
}

struct SweepArgs {
  std::string input, out_dir, sweep_config;
  SamplerOptions sampler;
};

struct SweepRow {
  std::string name;
  PriorSpec alpha, beta;
};

std::vector<SweepRow> read_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read sweep config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("sweep config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("priors") || !j["priors"].is_array())
    throw UsageError("sweep config must be an object with a \"priors\" array");
  std::vector<SweepRow> rows;
  for (const auto& item : j["priors"]) {
    SweepRow row;
    if (item.is_string()) {
      row.alpha = row.beta = PriorSpec::parse(item.get<std::string>());
      row.name = row.alpha.to_string();
    } else if (item.is_object() && item.contains("alpha") && item.contains("beta")) {
      row.alpha = PriorSpec::parse(item["alpha"].get<std::string>());
      row.beta = PriorSpec::parse(item["beta"].get<std::string>());
      row.name = item.value("name", row.alpha.to_string() + "/" + row.beta.to_string());
    } else {
      throw UsageError("each sweep entry must be a prior string or {\"alpha\", \"beta\"}");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw UsageError("a prior sweep needs at least two priors");
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_';
  return out;
}

int cmd_priors_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const auto seed = resolve_seed(a.sampler);
  const HmcConfig cfg = hmc_config(a.sampler, seed);
  const auto rows = read_sweep_config(a.sweep_config);
  const Dataset ds = load_input(a.input);
  OutputDir dir(a.out_dir);

  std::string csv = "prior,iterations,wall_time_s,alpha_mean,beta_mean,converged\n";
  json table = json::array();
  bool all_converged = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& row = rows[k];
    const auto row_start = Clock::now();
    SimpleLrModel model(ds, row.alpha, row.beta);
    const std::string prefix = "prior" + std::to_string(k + 1) + "_" + sanitize(row.name) + "_";
    std::string status;
    try {
      const auto r = sample_and_write(model, cfg, "simple", dir, prefix);
      const double wall = seconds_since(row_start);
      const double am = r.summary.at("alpha").mean, bm = r.summary.at("beta").mean;
      status = r.report.converged ? "yes" : "no";
      if (!r.report.converged) {
        all_converged = false;
        err << row.name << ": ";
        report_convergence(r.report, r.summary, err);
      }
      csv += csv_field(row.name) + ',' + std::to_string(cfg.total_iterations) + ',' +
             fmt(std::round(wall * 1000.0) / 1000.0) + ',' + fmt(am) + ',' + fmt(bm) + ',' +
             status + '\n';
      table.push_back({{"prior", row.name},
                       {"prior_alpha", row.alpha.to_string()},
                       {"prior_beta", row.beta.to_string()},
                       {"iterations", cfg.total_iterations},
                       {"alpha_mean", am},
                       {"beta_mean", bm},
                       {"converged", r.report.converged}});
      out << row.name << ": alpha " << fmt(am) << " beta " << fmt(bm) << " converged " << status
          << '\n';
    } catch (const InitializationError& e) {
      all_converged = false;
      err << row.name << ": " << e.what() << '\n';
      csv += csv_field(row.name) + ',' + std::to_string(cfg.total_iterations) + ",,,,init_failed\n";
      table.push_back({{"prior", row.name}, {"converged", false}, {"error", e.what()}});
    }
  }
  dir.write("sweep.csv", csv);
  dir.write_json("sweep.json", {{"rows", table}});
  json config = config_json(a.sampler, seed);
  config.erase("prior_alpha");
  config.erase("prior_beta");
  config["sweep_config"] = a.sweep_config;
  const int code = all_converged ? kExitOk : kExitConvergence;
  dir.finish("priors-sweep", config, input_json(a.input), seed, seconds_since(start), code);
  return code;
}

struct CompareArgs {
  std::string input, out_dir;
  SamplerOptions sampler;
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const auto seed = resolve_seed(a.sampler);
  const HmcConfig cfg = hmc_config(a.sampler, seed);
  const Dataset ds = load_input(a.input);
  const HillFit hill = fit_hill(ds);
  SimpleLrModel model(ds, PriorSpec::parse(a.sampler.prior_alpha),
                      PriorSpec::parse(a.sampler.prior_beta));
  OutputDir dir(a.out_dir);
  const auto r = sample_and_write(model, cfg, "simple", dir);
  const double am = r.summary.at("alpha").mean, bm = r.summary.at("beta").mean;
  auto bayes = [&](double d) { return inverse_logit(am + bm * d); };
  auto hill_fn = [&](double d) { return hill_response(d, hill); };

  double lo = ds[0].dosage, hi = ds[0].dosage;
  for (const auto& rec : ds.records()) lo = std::min(lo, rec.dosage), hi = std::max(hi, rec.dosage);
  if (hi == lo) hi = lo * 1.01;
  Points bayes_curve;
  for (int k = 0; k < 200; ++k) {
    const double d = lo + (hi - lo) * k / 199.0;
    bayes_curve.emplace_back(d, bayes(d));
  }
  SvgPlot plot("Hill fit vs. Bayesian logistic fit", "dosage", "survival ratio (n/N)");
  plot.add_markers(survival_ratios(ds), "#555555", "observed");
  plot.add_line(hill_curve(hill, lo, hi), color(1), "Hill equation");
  plot.add_line(std::move(bayes_curve), color(0), "Bayesian logistic");
  plot.include_y(0.0, 1.0);
  dir.write("compare.svg", plot.render());

  const double hw = weighted_residual(ds, hill_fn, true), hu = weighted_residual(ds, hill_fn, false);
  const double bw = weighted_residual(ds, bayes, true), bu = weighted_residual(ds, bayes, false);
  dir.write("residuals.csv", "model,weighted_residual,unweighted_residual\nhill," + fmt(hw) + ',' +
                                 fmt(hu) + "\nbayesian," + fmt(bw) + ',' + fmt(bu) + '\n');
  dir.write_json("compare.json",
                 {{"hill", {{"r_max", hill.r_max}, {"d50", hill.d50}, {"c_h", hill.c_h},
                            {"d10", hill.d10}, {"d90", hill.d90}}},
                  {"bayesian", {{"alpha_mean", am}, {"beta_mean", bm}}},
                  {"weighted_residual", {{"hill", hw}, {"bayesian", bw}}},
                  {"unweighted_residual", {{"hill", hu}, {"bayesian", bu}}}});
  const int code = report_convergence(r.report, r.summary, err);
  dir.finish("compare", config_json(a.sampler, seed), input_json(a.input), seed,
             seconds_since(start), code);
  out << "weighted residual: hill " << fmt(hw) << ", bayesian " << fmt(bw) << '\n';
  return code;
}

struct OracleArgs {
  std::string input, out_dir;
  std::string model = "simple";
  SamplerOptions sampler;
  int resolution = kDefaultGridResolution;
  int refinements = kDefaultGridRefinements;
  std::vector<double> alpha_bounds{GridBounds{}.alpha_lo, GridBounds{}.alpha_hi};
  std::vector<double> beta_bounds{GridBounds{}.beta_lo, GridBounds{}.beta_hi};
  int improved = -1, total = -1;
  std::vector<double> beta_prior{1.0, 1.0};
};

double agreement(double hmc_mean, double reference, double mcse) {
  return std::abs(hmc_mean - reference) / mcse;
}

int oracle_proportion(const OracleArgs& a, std::ostream& out, std::ostream& err,
                      Clock::time_point start) {
  if (a.improved < 0 || a.total < 1 || a.improved > a.total)
    throw UsageError("the proportion oracle needs --n and --total with 0 <= n <= total, total >= 1");
  if (a.beta_prior.size() != 2 || !(a.beta_prior[0] > 0) || !(a.beta_prior[1] > 0))
    throw UsageError("--beta-prior takes two positive shapes a,b");
  const auto seed = resolve_seed(a.sampler);
  const HmcConfig cfg = hmc_config(a.sampler, seed);
  ProportionModel model(a.improved, a.total, a.beta_prior[0], a.beta_prior[1]);

  // Moments of p by quadrature on the logit scale: E[p^k] = Z_k / Z_0.
  auto log_f = [&](double u, int k) {
    const std::vector<double> q{u};
    return model.log_density(q) - k * log1p_exp(-u);
  };
  const int points = 20000;
  const double z0 = quadrature_1d([&](double u) { return log_f(u, 0); }, -60, 60, points).log_normalizer;
  const double z1 = quadrature_1d([&](double u) { return log_f(u, 1); }, -60, 60, points).log_normalizer;
  const double z2 = quadrature_1d([&](double u) { return log_f(u, 2); }, -60, 60, points).log_normalizer;
  const double q_mean = std::exp(z1 - z0);
  const double q_sd = std::sqrt(std::max(0.0, std::exp(z2 - z0) - q_mean * q_mean));
  const auto exact = beta_moments(beta_binomial_posterior({a.beta_prior[0], a.beta_prior[1]},
                                                          a.improved, a.total));

  OutputDir dir(a.out_dir);
  const auto r = sample_and_write(model, cfg, "proportion", dir);
  const auto& p = r.summary.at("p");
  const double ratio = agreement(p.mean, exact.mean, p.mcse());
  dir.write("oracle.csv",
            "parameter,quadrature_mean,quadrature_sd,closed_form_mean,closed_form_sd,hmc_mean,"
            "hmc_sd,hmc_mcse,agreement_ratio\np," +
                fmt(q_mean) + ',' + fmt(q_sd) + ',' + fmt(exact.mean) + ',' + fmt(exact.sd) + ',' +
                fmt(p.mean) + ',' + fmt(p.sd) + ',' + fmt(p.mcse()) + ',' + fmt(ratio) + '\n');
  dir.write_json("oracle.json", {{"model", "proportion"},
                                 {"quadrature", {{"mean", q_mean}, {"sd", q_sd}}},
                                 {"closed_form", {{"mean", exact.mean}, {"sd", exact.sd}}},
                                 {"hmc", {{"mean", p.mean}, {"sd", p.sd}, {"mcse", json_num(p.mcse())}}},
                                 {"agreement_ratio", {{"p", json_num(ratio)}}}});
  const int code = report_convergence(r.report, r.summary, err);
  json config = {{"model", "proportion"},
                 {"n", a.improved},
                 {"total", a.total},
                 {"beta_prior", a.beta_prior},
                 {"chains", cfg.chains},
                 {"iters", cfg.total_iterations},
                 {"warmup_frac", cfg.warmup_fraction},
                 {"target_accept", cfg.target_accept},
                 {"trajectory_length", cfg.base_trajectory_length},
                 {"seed", seed}};
  dir.finish("oracle", config, nullptr, seed, seconds_since(start), code);
  out << "p: quadrature " << fmt(q_mean) << " closed form " << fmt(exact.mean) << " hmc "
      << fmt(p.mean) << " (|hmc - exact| / mcse = " << fmt(ratio) << ")\n";
  return code;
}

int cmd_oracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  if (a.model == "hier_centered" || a.model == "hier_ncp")
    throw UsageError("the grid oracle supports two-parameter posteriors only; hierarchical "
                     "models have 2E+4 parameters. Use --model simple or proportion");
  if (a.model == "proportion") return oracle_proportion(a, out, err, start);
  if (a.input.empty()) throw UsageError("--input is required for --model simple");
  if (a.alpha_bounds.size() != 2 || a.beta_bounds.size() != 2)
    throw UsageError("--alpha-bounds and --beta-bounds take lo,hi");

  SamplerOptions so = a.sampler;
  so.model = "simple";
  const auto seed = resolve_seed(so);
  const HmcConfig cfg = hmc_config(so, seed);
  const Dataset ds = load_input(a.input);
  SimpleLrModel model(ds, PriorSpec::parse(so.prior_alpha), PriorSpec::parse(so.prior_beta));
  const GridBounds bounds{a.alpha_bounds[0], a.alpha_bounds[1], a.beta_bounds[0], a.beta_bounds[1]};
  GridPosterior grid;
  try {
    grid = grid_posterior(model, bounds, a.resolution, a.refinements);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto gm = grid_moments(grid);

  OutputDir dir(a.out_dir);
  dir.write("grid.csv", grid_csv(grid));
  const auto r = sample_and_write(model, cfg, "simple", dir);
  std::string csv =
      "parameter,grid_mean,grid_sd,grid_q25,grid_median,grid_q75,hmc_mean,hmc_sd,hmc_mcse,"
      "agreement_ratio\n";
  json ratios;
  const char* names[] = {"alpha", "beta"};
  for (int k = 0; k < 2; ++k) {
    const auto& p = r.summary.at(names[k]);
    const double ratio = agreement(p.mean, gm[k].mean, p.mcse());
    ratios[names[k]] = json_num(ratio);
    csv += std::string(names[k]) + ',' + fmt(gm[k].mean) + ',' + fmt(gm[k].sd) + ',' +
           fmt(gm[k].q25) + ',' + fmt(gm[k].median) + ',' + fmt(gm[k].q75) + ',' + fmt(p.mean) +
           ',' + fmt(p.sd) + ',' + fmt(p.mcse()) + ',' + fmt(ratio) + '\n';
    out << names[k] << ": grid " << fmt(gm[k].mean) << " hmc " << fmt(p.mean)
        << " (|hmc - grid| / mcse = " << fmt(ratio) << ")\n";
  }
  dir.write("oracle.csv", csv);
  dir.write_json("oracle.json", {{"model", "simple"},
                                 {"cells", grid.cells.size()},
                                 {"generations", grid.generations},
                                 {"max_mass_history", grid.max_mass_history},
                                 {"agreement_ratio", ratios}});
  json config = config_json(so, seed);
  config["grid_resolution"] = a.resolution;
  config["refinements"] = a.refinements;
  config["alpha_bounds"] = a.alpha_bounds;
  config["beta_bounds"] = a.beta_bounds;
  const int code = report_convergence(r.report, r.summary, err);
  dir.finish("oracle", config, input_json(a.input), seed, seconds_since(start), code);
  return code;
}

struct SynthArgs {
  std::string out_dir;
  int records = 71;
  double alpha = -14.03, beta = 9.39;
  double sigma_alpha = 0.0, sigma_beta = 0.0;
  SamplerOptions seed_holder;
};

int cmd_synthesize(const SynthArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  if (a.records < 1) throw UsageError("--records must be at least 1");
  if (a.sigma_alpha < 0 || a.sigma_beta < 0) throw UsageError("sigmas must be non-negative");
  const auto seed = resolve_seed(a.seed_holder);
  const bool hier = a.sigma_alpha > 0 || a.sigma_beta > 0;
  const Dataset ds = hier ? synthesize_hierarchical(a.records, a.alpha, a.beta, a.sigma_alpha,
                                                    a.sigma_beta, seed)
                          : synthesize(a.records, a.alpha, a.beta, seed);
  OutputDir dir(a.out_dir);
  dir.write("data.csv", serialize_trials(ds));
  json config{{"records", a.records}, {"alpha", a.alpha}, {"beta", a.beta}, {"seed", seed}};
  if (hier) {
    config["sigma_alpha"] = a.sigma_alpha;
    config["sigma_beta"] = a.sigma_beta;
  }
  dir.finish("synthesize", config, nullptr, seed, seconds_since(start), kExitOk);
  out << (dir.path() / "data.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian dose-response analysis"};
  app.name("doseresp");
  app.require_subcommand(1);

  SummarizeArgs summarize_args;
  auto* summarize_cmd = app.add_subcommand("summarize", "Descriptive statistics and survival-ratio plot");
  summarize_cmd->add_option("--input", summarize_args.input, "Trial CSV")->required();
  summarize_cmd->add_option("--out-dir", summarize_args.out_dir)->required();

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "HMC posterior sampling with diagnostics");
  sample_cmd->add_option("--input", sample_args.input, "Trial CSV")->required();
  sample_cmd->add_option("--out-dir", sample_args.out_dir)->required();
  add_sampler_flags(sample_cmd, sample_args.sampler, true);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("priors-sweep", "Pooled model under several priors");
  sweep_cmd->add_option("--input", sweep_args.input, "Trial CSV")->required();
  sweep_cmd->add_option("--out-dir", sweep_args.out_dir)->required();
  sweep_cmd->add_option("--sweep-config", sweep_args.sweep_config,
                        "JSON file: {\"priors\": [\"normal(0,20)\", ...]}")
      ->required();
  add_sampler_flags(sweep_cmd, sweep_args.sampler, false);

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand("compare", "Hill equation vs. Bayesian logistic fit");
  compare_cmd->add_option("--input", compare_args.input, "Trial CSV")->required();
  compare_cmd->add_option("--out-dir", compare_args.out_dir)->required();
  add_sampler_flags(compare_cmd, compare_args.sampler, false);

  OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "Deterministic grid/quadrature check of HMC");
  oracle_cmd->add_option("--input", oracle_args.input, "Trial CSV (simple model)");
  oracle_cmd->add_option("--out-dir", oracle_args.out_dir)->required();
  oracle_cmd->add_option("--model", oracle_args.model, "simple or proportion");
  add_sampler_flags(oracle_cmd, oracle_args.sampler, false);
  oracle_cmd->add_option("--grid-resolution", oracle_args.resolution);
  oracle_cmd->add_option("--refinements", oracle_args.refinements);
  oracle_cmd->add_option("--alpha-bounds", oracle_args.alpha_bounds, "lo,hi")->delimiter(',');
  oracle_cmd->add_option("--beta-bounds", oracle_args.beta_bounds, "lo,hi")->delimiter(',');
  oracle_cmd->add_option("--n", oracle_args.improved, "Successes (proportion model)");
  oracle_cmd->add_option("--total", oracle_args.total, "Trials (proportion model)");
  oracle_cmd->add_option("--beta-prior", oracle_args.beta_prior, "a,b (proportion model)")
      ->delimiter(',');

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synthesize", "Write a synthetic trial CSV");
  synth_cmd->add_option("--out-dir", synth_args.out_dir)->required();
  synth_cmd->add_option("--records", synth_args.records);
  synth_cmd->add_option("--alpha", synth_args.alpha, "Intercept (mu_alpha if hierarchical)");
  synth_cmd->add_option("--beta", synth_args.beta, "Slope (mu_beta if hierarchical)");
  synth_cmd->add_option("--sigma-alpha", synth_args.sigma_alpha);
  synth_cmd->add_option("--sigma-beta", synth_args.sigma_beta);
  add_seed_flag(synth_cmd, synth_args.seed_holder);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (summarize_cmd->parsed()) return cmd_summarize(summarize_args, out);
    if (sample_cmd->parsed()) return cmd_sample(sample_args, out, err);
    if (sweep_cmd->parsed()) return cmd_priors_sweep(sweep_args, out, err);
    if (compare_cmd->parsed()) return cmd_compare(compare_args, out, err);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_args, out, err);
    if (synth_cmd->parsed()) return cmd_synthesize(synth_args, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const HillError& e) {
    err << "cannot fit the Hill equation to this data: " << e.what() << '\n';
    return kExitData;
  } catch (const InitializationError& e) {
    err << "initialization failed: " << e.what() << '\n';
    return kExitInitialization;
  } catch (const PriorError& e) {
    err << "invalid prior: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const OracleError& e) {
    err << "oracle error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace doseresp::cli
