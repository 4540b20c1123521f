#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "groupmix/data.hpp"
#include "groupmix/mixture.hpp"

namespace groupmix {

/// Training controls. The prior sigmas are the variances of the zero-mean
/// Gaussian parameter priors: each scalar contributes -x^2 / (2 sigma) to
/// the objective (normalization constants dropped) and -x / sigma to the
/// gradient.
struct Hyperparams {
  std::size_t num_groups = 1;    // K
  double sigma_pi = 0.3;         // prior variance for the group weights
  double sigma_rho = 1.0;        // prior variance for each behavior vector
  std::size_t em_max_iters = 200;
  double em_tol = 1e-6;          // relative objective-change threshold
  std::size_t inner_steps = 5;   // quasi-Newton steps per EM iteration
  std::size_t restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-user posterior over groups under the previous iterate; rows sum
/// to 1.
struct Responsibilities {
  std::size_t num_users = 0;
  std::size_t num_groups = 0;
  std::vector<double> values;  // row-major, num_users x num_groups

  std::span<const double> row(std::size_t u) const {
    return {values.data() + u * num_groups, num_groups};
  }
  std::span<double> row(std::size_t u) {
    return {values.data() + u * num_groups, num_groups};
  }
};

/// Flat parameter layout used by the inner optimizer and the gradient:
/// [pi (K), rho_1 (n), ..., rho_K (n)].
std::vector<double> pack_params(const ModelParams& m);
ModelParams unpack_params(std::span<const double> x, std::size_t num_groups,
                          std::size_t feature_dim);

/// MAP objective: sum over users of log sum_g P(g|pi) prod_d P(b|s;rho_g)
/// (evaluated in log space) plus the Gaussian log-prior terms.
double log_posterior_objective(const Dataset& d, const ModelParams& m,
                               const Hyperparams& h, int workers = 1);

/// Posterior group membership per user under the current parameters.
Responsibilities e_step(const Dataset& d, const ModelParams& m,
                        int workers = 1);

/// Expected complete-data log-likelihood under the responsibilities, plus
/// log-priors. grad receives d/d(theta) in pack_params layout and must have
/// K + K*n elements. Returns the bound value.
double lower_bound_and_grad(const Dataset& d, const Responsibilities& r,
                            const ModelParams& m, const Hyperparams& h,
                            std::span<double> grad, int workers = 1);

struct TraceRow {
  std::size_t iteration;
  double objective;
  double max_abs_grad;
  double seconds;
};

struct RestartSummary {
  std::uint64_t seed;
  double final_objective;
  std::size_t iterations;
  bool converged;
  std::vector<TraceRow> trace;
};

struct TrainResult {
  ModelParams params;
  std::vector<TraceRow> trace;  // trace of the winning restart
  std::vector<RestartSummary> restarts;
  std::uint64_t winning_seed = 0;
  double final_objective = 0.0;
};

/// MAP EM: alternates the e-step with a truncated L-BFGS pass over the
/// negated lower bound, stopping on relative objective change or the
/// iteration cap. Runs h.restarts seeded restarts (seed, seed+1, ...) and
/// keeps the one with the highest final objective; ties go to the earliest
/// seed. Throws NumericalFailure if the objective turns non-finite.
TrainResult em_fit(const Dataset& d, const Hyperparams& h, int workers = 1);

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::filesystem::path& path);

}  // namespace groupmix
