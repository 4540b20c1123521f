#pragma once

#include <functional>
#include <span>
#include <vector>

namespace groupmix {

/// Limited-memory BFGS with a strong-Wolfe line search, exposed over a
/// plain value-and-gradient callback. Used truncated (max_steps of a few)
/// as the inner loop of EM training, and standalone elsewhere.
struct OptimizerConfig {
  std::size_t memory = 10;      // stored curvature pairs
  std::size_t max_steps = 100;  // iteration cap per minimize() call
  double c1 = 1e-4;             // sufficient-decrease constant
  double c2 = 0.9;              // curvature constant, c1 < c2 < 1
  std::size_t max_backtracks = 50;  // function evaluations per line search
  double grad_tol = 1e-8;       // stop when ||grad||_inf falls below this

  void validate() const;
};

/// Evaluates the objective at x and fills grad (same length as x);
/// returns the objective value.
using ObjectiveFn =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct OptStep {
  double value;
  double grad_norm;  // infinity norm
  double step_length;
};

struct OptResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<OptStep> trace;  // one entry per accepted step
  std::size_t iterations = 0;
  bool line_search_failed = false;
};

/// Minimizes f from x0. Every accepted step satisfies the strong Wolfe
/// conditions, so the sequence of objective values is nonincreasing. If the
/// line search exhausts its evaluation budget, the best iterate found so
/// far is returned with line_search_failed set. Throws InvalidInput if f
/// is not finite at x0.
OptResult minimize(const ObjectiveFn& f, std::vector<double> x0,
                   const OptimizerConfig& cfg);

}  // namespace groupmix
