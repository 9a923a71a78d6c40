#include "doseresp/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

namespace doseresp {

void HmcConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
  if (total_iterations < 20) throw std::invalid_argument("total_iterations must be >= 20");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
    throw std::invalid_argument("warmup_fraction must be in (0, 1)");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target_accept must be in (0, 1)");
  if (!(base_trajectory_length > 0.0))
    throw std::invalid_argument("base_trajectory_length must be positive");
  if (!(divergence_threshold > 0.0))
    throw std::invalid_argument("divergence_threshold must be positive");
  if (max_leapfrog_steps < 1) throw std::invalid_argument("max_leapfrog_steps must be >= 1");
}

int HmcConfig::warmup_iterations() const {
  return static_cast<int>(std::floor(total_iterations * warmup_fraction));
}

int HmcConfig::sampling_iterations() const { return total_iterations - warmup_iterations(); }

// ---------------------------------------------------------------------------

HmcState make_state(const ModelDensity& model, std::vector<double> position) {
  HmcState s;
  s.position = std::move(position);
  s.gradient.assign(model.dim(), 0.0);
  s.log_density = model.log_density_gradient(s.position, s.gradient);
  return s;
}

double kinetic_energy(std::span<const double> momentum, std::span<const double> mass_diag) {
  double k = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i)
    k += momentum[i] * momentum[i] / mass_diag[i];
  return 0.5 * k;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

bool leapfrog(HmcState& state, std::span<double> momentum, double step_size, int steps,
              const ModelDensity& model, std::span<const double> mass_diag) {
  const std::size_t n = state.position.size();
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) momentum[i] += 0.5 * step_size * state.gradient[i];
    for (std::size_t i = 0; i < n; ++i) state.position[i] += step_size * momentum[i] / mass_diag[i];
    state.log_density = model.log_density_gradient(state.position, state.gradient);
    if (!std::isfinite(state.log_density) || !all_finite(state.gradient)) return false;
    for (std::size_t i = 0; i < n; ++i) momentum[i] += 0.5 * step_size * state.gradient[i];
  }
  return true;
}

TransitionInfo hmc_transition(HmcState& state, const ModelDensity& model, double step_size,
                              double base_trajectory_length, std::span<const double> mass_diag,
                              Rng& rng, const TransitionOptions& options) {
  const std::size_t n = state.position.size();
  std::vector<double> momentum(n);
  for (std::size_t i = 0; i < n; ++i) momentum[i] = std::sqrt(mass_diag[i]) * rng.normal();

  const double length = base_trajectory_length * rng.uniform(0.8, 1.2);
  TransitionInfo info;
  info.steps = static_cast<int>(
      std::clamp(std::round(length / step_size), 1.0, static_cast<double>(options.max_steps)));

  const double h0 = -state.log_density + kinetic_energy(momentum, mass_diag);
  HmcState proposal = state;
  const bool finite = leapfrog(proposal, momentum, step_size, info.steps, model, mass_diag);
  const double h1 = -proposal.log_density + kinetic_energy(momentum, mass_diag);
  info.energy_error = h1 - h0;

  if (!finite || !std::isfinite(info.energy_error) ||
      info.energy_error > options.divergence_threshold) {
    info.divergent = true;
    info.accept_prob = 0.0;
    return info;
  }
  info.accept_prob = info.energy_error <= 0.0 ? 1.0 : std::exp(-info.energy_error);
  if (rng.uniform() < info.accept_prob) state = std::move(proposal);
  return info;
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kGamma = 0.05;
constexpr double kT0 = 10.0;
constexpr double kKappa = 0.75;
}  // namespace

DualAveraging::DualAveraging(double initial_step_size, double target_accept)
    : target_(target_accept) {
  restart(initial_step_size);
}

void DualAveraging::restart(double initial_step_size) {
  mu_ = std::log(10.0 * initial_step_size);
  log_step_ = std::log(initial_step_size);
  log_step_bar_ = 0.0;
  h_bar_ = 0.0;
  t_ = 0.0;
}

void DualAveraging::update(double accept_prob) {
  t_ += 1.0;
  const double eta = 1.0 / (t_ + kT0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
  log_step_ = mu_ - std::sqrt(t_) / kGamma * h_bar_;
  const double w = std::pow(t_, -kKappa);
  log_step_bar_ = w * log_step_ + (1.0 - w) * log_step_bar_;
}

double DualAveraging::step_size() const { return std::exp(log_step_); }

double DualAveraging::averaged_step_size() const {
  return t_ > 0.0 ? std::exp(log_step_bar_) : std::exp(log_step_);
}

double find_initial_step_size(const HmcState& state, const ModelDensity& model,
                              double step_size, std::span<const double> mass_diag, Rng& rng) {
  const std::size_t n = state.position.size();
  const double log_target = std::log(0.8);
  std::vector<double> momentum(n);
  int direction = 0;
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < n; ++i) momentum[i] = std::sqrt(mass_diag[i]) * rng.normal();
    const double h0 = -state.log_density + kinetic_energy(momentum, mass_diag);
    HmcState trial = state;
    const bool ok = leapfrog(trial, momentum, step_size, 1, model, mass_diag);
    const double h1 = -trial.log_density + kinetic_energy(momentum, mass_diag);
    double log_accept = h0 - h1;
    if (!ok || !std::isfinite(log_accept)) log_accept = -INFINITY;
    if (direction == 0) direction = log_accept > log_target ? 1 : -1;
    if (direction == 1 && !(log_accept > log_target)) break;
    if (direction == -1 && !(log_accept < log_target)) break;
    step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
    if (step_size > 1e7 || step_size < 1e-10) break;
  }
  return std::clamp(step_size, 1e-10, 1e7);
}

// ---------------------------------------------------------------------------

WarmupSchedule WarmupSchedule::make(int warmup) {
  WarmupSchedule s;
  if (warmup <= 0) return s;
  s.init_buffer = static_cast<int>(std::floor(0.15 * warmup));
  s.term_buffer = static_cast<int>(std::floor(0.10 * warmup));
  const int middle = warmup - s.init_buffer - s.term_buffer;
  int window = 25;
  int start = 0;
  while (start < middle) {
    int size = window;
    // The last window absorbs whatever the next doubling would not fill.
    if (start + size + 2 * window > middle) size = middle - start;
    s.windows.push_back(size);
    start += size;
    window *= 2;
  }
  return s;
}

// ---------------------------------------------------------------------------

std::vector<double> ChainDraws::column(std::size_t param) const {
  std::vector<double> out(iterations());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, param);
  return out;
}

std::size_t ChainDraws::divergence_count() const {
  return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), true));
}

std::vector<std::vector<double>> SampleRun::parameter_chains(std::size_t param) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.column(param));
  return out;
}

std::size_t SampleRun::parameter_index(const std::string& name) const {
  const auto it = std::find(parameter_names.begin(), parameter_names.end(), name);
  if (it == parameter_names.end()) throw std::out_of_range("no parameter named " + name);
  return static_cast<std::size_t>(it - parameter_names.begin());
}

std::size_t SampleRun::divergence_count() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.divergence_count();
  return n;
}

std::size_t SampleRun::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.iterations();
  return n;
}

namespace {

HmcState initialize(const ModelDensity& model, Rng& rng) {
  const std::size_t n = model.dim();
  std::vector<double> q(n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (auto& v : q) v = rng.uniform(-2.0, 2.0);
    HmcState s = make_state(model, q);
    if (std::isfinite(s.log_density) && all_finite(s.gradient)) return s;
  }
  throw InitializationError(
      "could not find a starting point with finite log density in 100 attempts");
}

// Running mean/variance over one adaptation window.
class WindowVariance {
 public:
  explicit WindowVariance(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}

  void add(std::span<const double> x) {
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / count_;
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  // Metric from the window's variances, shrunk towards 1e-3 as in Stan.
  std::vector<double> mass_diagonal() const {
    std::vector<double> mass(mean_.size());
    const double n = count_;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      const double var = count_ > 1 ? m2_[i] / (n - 1.0) : 1.0;
      const double reg = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      mass[i] = 1.0 / reg;
    }
    return mass;
  }

  std::size_t count() const { return count_; }

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

}  // namespace

ChainDraws run_chain(const ModelDensity& model, const HmcConfig& config, int chain) {
  Rng rng(chain_seed(config.seed, chain));
  const std::size_t dim = model.dim();
  HmcState state = initialize(model, rng);

  const TransitionOptions options{config.divergence_threshold, config.max_leapfrog_steps};
  std::vector<double> mass(dim, 1.0);
  double step = find_initial_step_size(state, model, 1.0, mass, rng);
  DualAveraging adapt(step, config.target_accept);

  const int warmup = config.warmup_iterations();
  const WarmupSchedule schedule = WarmupSchedule::make(warmup);

  for (int i = 0; i < schedule.init_buffer; ++i) {
    const auto info = hmc_transition(state, model, adapt.step_size(),
                                     config.base_trajectory_length, mass, rng, options);
    adapt.update(info.accept_prob);
  }
  for (int window : schedule.windows) {
    WindowVariance var(dim);
    for (int i = 0; i < window; ++i) {
      const auto info = hmc_transition(state, model, adapt.step_size(),
                                       config.base_trajectory_length, mass, rng, options);
      adapt.update(info.accept_prob);
      var.add(state.position);
    }
    if (var.count() >= 3) {
      mass = var.mass_diagonal();
      step = find_initial_step_size(state, model, adapt.step_size(), mass, rng);
      adapt.restart(step);
    }
  }
  for (int i = 0; i < schedule.term_buffer; ++i) {
    const auto info = hmc_transition(state, model, adapt.step_size(),
                                     config.base_trajectory_length, mass, rng, options);
    adapt.update(info.accept_prob);
  }

  ChainDraws out;
  out.final_step_size = adapt.averaged_step_size();
  out.mass_diagonal = mass;
  const int samples = config.sampling_iterations();
  const std::size_t num_params = model.parameter_names().size();
  out.num_params = num_params;
  out.draws.reserve(static_cast<std::size_t>(samples) * num_params);
  out.divergent.reserve(samples);
  out.accept_prob.reserve(samples);
  out.leapfrog_steps.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const auto info = hmc_transition(state, model, out.final_step_size,
                                     config.base_trajectory_length, mass, rng, options);
    const auto constrained = model.constrain(state.position);
    out.draws.insert(out.draws.end(), constrained.begin(), constrained.end());
    out.divergent.push_back(info.divergent);
    out.accept_prob.push_back(info.accept_prob);
    out.leapfrog_steps.push_back(info.steps);
  }
  return out;
}

SampleRun run_chains(const ModelDensity& model, const HmcConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  SampleRun run;
  run.config = config;
  run.parameter_names = model.parameter_names();
  run.chains.resize(static_cast<std::size_t>(config.chains));

  std::vector<std::exception_ptr> errors(run.chains.size());
  auto work = [&](int c) {
    try {
      run.chains[static_cast<std::size_t>(c)] = run_chain(model, config, c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  if (config.parallel && config.chains > 1) {
    std::vector<std::thread> threads;
    for (int c = 0; c < config.chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.chains; ++c) work(c);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  run.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace doseresp
