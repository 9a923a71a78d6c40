#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "doseresp/model.hpp"
#include "doseresp/rng.hpp"

namespace doseresp {

struct HmcConfig {
  int chains = 4;
  /// Iterations per chain, warmup included.
  int total_iterations = 4000;
  double warmup_fraction = 0.5;
  double target_accept = 0.8;
  /// Integration time per transition before jitter, in units of the
  /// adapted metric.
  double base_trajectory_length = 2.0;
  /// Energy error above which a transition is rejected and flagged divergent.
  double divergence_threshold = 1000.0;
  /// Upper bound on leapfrog steps per transition.
  int max_leapfrog_steps = 1024;
  std::uint64_t seed = 1;
  /// Run chains on separate threads. Results do not depend on this.
  bool parallel = true;

  void validate() const;
  int warmup_iterations() const;
  int sampling_iterations() const;
};

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Position on the unconstrained scale with its cached log density and
/// gradient.
struct HmcState {
  std::vector<double> position;
  std::vector<double> gradient;
  double log_density = 0.0;
};

HmcState make_state(const ModelDensity& model, std::vector<double> position);

/// 0.5 * sum(p_i^2 / m_i)
double kinetic_energy(std::span<const double> momentum, std::span<const double> mass_diag);

/// `steps` half-kick/drift/half-kick updates of (q, p) under
/// H(q, p) = -log_density(q) + 0.5 p' M^-1 p with diagonal M. Returns false
/// as soon as the log density or gradient becomes non-finite; the state is
/// then left partially updated and must be discarded.
bool leapfrog(HmcState& state, std::span<double> momentum, double step_size, int steps,
              const ModelDensity& model, std::span<const double> mass_diag);

struct TransitionOptions {
  double divergence_threshold = 1000.0;
  int max_steps = 1024;
};

struct TransitionInfo {
  double accept_prob = 0.0;
  bool divergent = false;
  int steps = 0;
  double energy_error = 0.0;
};

/// One HMC transition. Momentum is drawn from N(0, M); the integration time
/// is base_trajectory_length jittered uniformly in [0.8, 1.2], giving
/// max(1, round(time / step_size)) leapfrog steps. Divergent proposals
/// (energy error above the threshold, or non-finite) are rejected.
TransitionInfo hmc_transition(HmcState& state, const ModelDensity& model, double step_size,
                              double base_trajectory_length, std::span<const double> mass_diag,
                              Rng& rng, const TransitionOptions& options = {});

/// Nesterov dual averaging of the log step size towards a target
/// acceptance rate (gamma = 0.05, t0 = 10, kappa = 0.75, shrinkage towards
/// log(10 * initial step size)).
class DualAveraging {
 public:
  DualAveraging(double initial_step_size, double target_accept);

  void restart(double initial_step_size);
  void update(double accept_prob);

  /// Step size to use for the next warmup transition.
  double step_size() const;
  /// Averaged iterate, frozen for sampling once warmup ends.
  double averaged_step_size() const;

 private:
  double target_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  double t_ = 0.0;
};

/// Doubles or halves `step_size` until a single leapfrog step crosses an
/// acceptance probability of 0.8.
double find_initial_step_size(const HmcState& state, const ModelDensity& model,
                              double step_size, std::span<const double> mass_diag, Rng& rng);

/// Warmup layout for `warmup` iterations: an initial step-size-only buffer
/// (15%), slow windows of doubling length for metric estimation (75%), and a
/// final step-size buffer (10%).
struct WarmupSchedule {
  int init_buffer = 0;
  int term_buffer = 0;
  /// Lengths of consecutive metric-adaptation windows.
  std::vector<int> windows;

  static WarmupSchedule make(int warmup);
};

struct ChainDraws {
  std::size_t num_params = 0;
  /// Post-warmup draws on the constrained scale, row-major
  /// [iteration][parameter].
  std::vector<double> draws;
  std::vector<bool> divergent;
  std::vector<double> accept_prob;
  std::vector<int> leapfrog_steps;
  double final_step_size = 0.0;
  std::vector<double> mass_diagonal;

  std::size_t iterations() const { return divergent.size(); }
  double at(std::size_t iteration, std::size_t param) const {
    return draws[iteration * num_params + param];
  }
  std::vector<double> column(std::size_t param) const;
  std::size_t divergence_count() const;
};

struct SampleRun {
  std::vector<ChainDraws> chains;
  std::vector<std::string> parameter_names;
  HmcConfig config;
  double duration_seconds = 0.0;

  /// Per-chain draw vectors of one parameter.
  std::vector<std::vector<double>> parameter_chains(std::size_t param) const;
  std::size_t parameter_index(const std::string& name) const;
  std::size_t divergence_count() const;
  std::size_t total_draws() const;
};

/// Runs config.chains independent chains; chain c is seeded with
/// chain_seed(config.seed, c). Output is bit-identical for identical inputs
/// whether or not chains run in parallel.
SampleRun run_chains(const ModelDensity& model, const HmcConfig& config);

/// Single chain as run by run_chains.
ChainDraws run_chain(const ModelDensity& model, const HmcConfig& config, int chain);

}  // namespace doseresp
