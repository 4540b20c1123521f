#include "groupmix/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "groupmix/errors.hpp"
#include "groupmix/kernels.hpp"
#include "groupmix/optimizer.hpp"
#include "groupmix/parallel.hpp"
#include "groupmix/rng.hpp"

namespace groupmix {

namespace {

void check_dims(const Dataset& d, const ModelParams& m) {
  if (m.num_groups() == 0) {
    throw InvalidInput("model has no groups");
  }
  if (m.feature_dim() != d.feature_dim) {
    throw InvalidInput("model feature dimension " +
                       std::to_string(m.feature_dim()) +
                       " does not match dataset feature dimension " +
                       std::to_string(d.feature_dim));
  }
}

// Sum of log P(b_d | s_d; rho_g) over each user's observations, row-major
// users x groups. Observations are added in history order, matching the
// accumulation in posterior_update.
std::vector<double> user_group_loglik(const Dataset& d, const ModelParams& m,
                                      int workers) {
  const std::size_t num_groups = m.num_groups();
  std::vector<double> ll(d.num_users() * num_groups, 0.0);
  parallel_for(d.num_users(), workers, [&](std::size_t u) {
    const UserRecord& user = d.users[u];
    std::vector<double> logp;
    for (std::size_t g = 0; g < num_groups; ++g) {
      double total = 0.0;
      for (const Observation& obs : user.observations) {
        logp.resize(obs.stimulus.size());
        log_distribution_into(obs.stimulus, m.group_weights[g], logp);
        total += logp[static_cast<std::size_t>(
            obs.stimulus.index_of(obs.observed))];
      }
      ll[u * num_groups + g] = total;
    }
  });
  return ll;
}

double gaussian_log_prior(const ModelParams& m, const Hyperparams& h) {
  double value = -kernels::squared_norm(m.pi) / (2.0 * h.sigma_pi);
  for (const WeightVector& w : m.group_weights) {
    value -= kernels::squared_norm(w) / (2.0 * h.sigma_rho);
  }
  return value;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

ModelParams random_init(std::size_t num_groups, std::size_t feature_dim,
                        std::uint64_t seed) {
  Rng rng(seed);
  ModelParams m;
  m.pi.assign(num_groups, 0.0);
  m.group_weights.resize(num_groups);
  for (WeightVector& w : m.group_weights) {
    w.resize(feature_dim);
    for (double& x : w) {
      x = rng.uniform(-0.1, 0.1);
    }
  }
  return m;
}

RestartSummary run_restart(const Dataset& d, const Hyperparams& h,
                           std::uint64_t seed, int workers,
                           ModelParams& out_params) {
  const std::size_t num_groups = h.num_groups;
  const std::size_t feature_dim = d.feature_dim;
  ModelParams m = random_init(num_groups, feature_dim, seed);

  OptimizerConfig inner;
  inner.max_steps = h.inner_steps;

  RestartSummary summary;
  summary.seed = seed;
  summary.converged = false;

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };

  double objective = log_posterior_objective(d, m, h, workers);
  if (!std::isfinite(objective)) {
    throw NumericalFailure("non-finite objective at initialization", 0);
  }
  {
    Responsibilities r0 = e_step(d, m, workers);
    std::vector<double> grad0(num_groups + num_groups * feature_dim);
    lower_bound_and_grad(d, r0, m, h, grad0, workers);
    summary.trace.push_back({0, objective, inf_norm(grad0), elapsed()});
  }

  for (std::size_t it = 1; it <= h.em_max_iters; ++it) {
    const Responsibilities r = e_step(d, m, workers);

    const ObjectiveFn neg_bound = [&](std::span<const double> x,
                                      std::span<double> grad) {
      const ModelParams trial = unpack_params(x, num_groups, feature_dim);
      const double value = lower_bound_and_grad(d, r, trial, h, grad, workers);
      for (double& g : grad) {
        g = -g;
      }
      return -value;
    };

    OptResult opt;
    try {
      opt = minimize(neg_bound, pack_params(m), inner);
    } catch (const InvalidInput& e) {
      throw NumericalFailure(
          "EM iteration " + std::to_string(it) + ": " + e.what(), it);
    }
    m = unpack_params(opt.x, num_groups, feature_dim);

    const double next = log_posterior_objective(d, m, h, workers);
    if (!std::isfinite(next)) {
      throw NumericalFailure(
          "non-finite objective at EM iteration " + std::to_string(it), it);
    }
    summary.trace.push_back({it, next, inf_norm(opt.gradient), elapsed()});
    summary.iterations = it;

    const double change = std::abs(next - objective);
    objective = next;
    if (change <= h.em_tol * std::max(1.0, std::abs(objective))) {
      summary.converged = true;
      break;
    }
  }

  summary.final_objective = objective;
  out_params = std::move(m);
  return summary;
}

}  // namespace

void Hyperparams::validate() const {
  if (num_groups < 1) {
    throw InvalidInput("num_groups must be at least 1");
  }
  if (!(sigma_pi > 0.0) || !(sigma_rho > 0.0)) {
    throw InvalidInput("prior variances must be positive");
  }
  if (em_max_iters < 1) {
    throw InvalidInput("em_max_iters must be at least 1");
  }
  if (!(em_tol >= 0.0)) {
    throw InvalidInput("em_tol must be nonnegative");
  }
  if (inner_steps < 1) {
    throw InvalidInput("inner_steps must be at least 1");
  }
  if (restarts < 1) {
    throw InvalidInput("restarts must be at least 1");
  }
}

std::vector<double> pack_params(const ModelParams& m) {
  std::vector<double> x;
  x.reserve(m.num_groups() + m.num_groups() * m.feature_dim());
  x.insert(x.end(), m.pi.begin(), m.pi.end());
  for (const WeightVector& w : m.group_weights) {
    x.insert(x.end(), w.begin(), w.end());
  }
  return x;
}

ModelParams unpack_params(std::span<const double> x, std::size_t num_groups,
                          std::size_t feature_dim) {
  if (x.size() != num_groups + num_groups * feature_dim) {
    throw InvalidInput("packed parameter vector has " +
                       std::to_string(x.size()) + " entries, expected " +
                       std::to_string(num_groups + num_groups * feature_dim));
  }
  ModelParams m;
  m.pi.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(num_groups));
  m.group_weights.resize(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    const double* begin = x.data() + num_groups + g * feature_dim;
    m.group_weights[g].assign(begin, begin + feature_dim);
  }
  return m;
}

double log_posterior_objective(const Dataset& d, const ModelParams& m,
                               const Hyperparams& h, int workers) {
  check_dims(d, m);
  const std::size_t num_groups = m.num_groups();
  const std::vector<double> ll = user_group_loglik(d, m, workers);
  const double lse_pi = kernels::log_sum_exp(m.pi);

  double value = 0.0;
  std::vector<double> terms(num_groups);
  for (std::size_t u = 0; u < d.num_users(); ++u) {
    for (std::size_t g = 0; g < num_groups; ++g) {
      terms[g] = (m.pi[g] - lse_pi) + ll[u * num_groups + g];
    }
    value += kernels::log_sum_exp(terms);
  }
  return value + gaussian_log_prior(m, h);
}

Responsibilities e_step(const Dataset& d, const ModelParams& m, int workers) {
  check_dims(d, m);
  const std::size_t num_groups = m.num_groups();
  const std::vector<double> ll = user_group_loglik(d, m, workers);
  const double lse_pi = kernels::log_sum_exp(m.pi);

  Responsibilities r;
  r.num_users = d.num_users();
  r.num_groups = num_groups;
  r.values.resize(r.num_users * num_groups);
  std::vector<double> terms(num_groups);
  for (std::size_t u = 0; u < r.num_users; ++u) {
    for (std::size_t g = 0; g < num_groups; ++g) {
      terms[g] = (m.pi[g] - lse_pi) + ll[u * num_groups + g];
    }
    kernels::softmax(terms, r.row(u));
  }
  return r;
}

double lower_bound_and_grad(const Dataset& d, const Responsibilities& r,
                            const ModelParams& m, const Hyperparams& h,
                            std::span<double> grad, int workers) {
  check_dims(d, m);
  const std::size_t num_groups = m.num_groups();
  const std::size_t feature_dim = m.feature_dim();
  const std::size_t dim = num_groups + num_groups * feature_dim;
  if (r.num_users != d.num_users() || r.num_groups != num_groups) {
    throw InvalidInput(
        "responsibilities shape " + std::to_string(r.num_users) + "x" +
        std::to_string(r.num_groups) + " does not match " +
        std::to_string(d.num_users()) + " users and " +
        std::to_string(num_groups) + " groups");
  }
  if (grad.size() != dim) {
    throw InvalidInput("gradient buffer has " + std::to_string(grad.size()) +
                       " entries, expected " + std::to_string(dim));
  }

  std::vector<double> prior_probs(num_groups);
  kernels::softmax(m.pi, prior_probs);
  const double lse_pi = kernels::log_sum_exp(m.pi);

  // Per-user slots, reduced in user order afterwards: the result is
  // identical for any worker count.
  std::vector<double> user_value(d.num_users(), 0.0);
  std::vector<double> user_grad(d.num_users() * dim, 0.0);

  parallel_for(d.num_users(), workers, [&](std::size_t u) {
    const UserRecord& user = d.users[u];
    const std::span<const double> resp = r.row(u);
    const std::span<double> ugrad{user_grad.data() + u * dim, dim};

    double value = 0.0;
    for (std::size_t g = 0; g < num_groups; ++g) {
      value += resp[g] * (m.pi[g] - lse_pi);
      ugrad[g] = resp[g] - prior_probs[g];
    }

    std::vector<double> logp;
    for (const Observation& obs : user.observations) {
      const auto idx = static_cast<std::size_t>(
          obs.stimulus.index_of(obs.observed));
      logp.resize(obs.stimulus.size());
      for (std::size_t g = 0; g < num_groups; ++g) {
        log_distribution_into(obs.stimulus, m.group_weights[g], logp);
        value += resp[g] * logp[idx];
        const std::span<double> grho =
            ugrad.subspan(num_groups + g * feature_dim, feature_dim);
        for (std::size_t c = 0; c < obs.stimulus.size(); ++c) {
          kernels::axpy(-resp[g] * std::exp(logp[c]),
                        obs.stimulus.candidates()[c].features, grho);
        }
        kernels::axpy(resp[g], obs.stimulus.candidates()[idx].features, grho);
      }
    }
    user_value[u] = value;
  });

  double value = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t u = 0; u < d.num_users(); ++u) {
    value += user_value[u];
    kernels::axpy(1.0, {user_grad.data() + u * dim, dim}, grad);
  }

  value += gaussian_log_prior(m, h);
  for (std::size_t g = 0; g < num_groups; ++g) {
    grad[g] -= m.pi[g] / h.sigma_pi;
    for (std::size_t i = 0; i < feature_dim; ++i) {
      grad[num_groups + g * feature_dim + i] -=
          m.group_weights[g][i] / h.sigma_rho;
    }
  }
  return value;
}

TrainResult em_fit(const Dataset& d, const Hyperparams& h, int workers) {
  h.validate();
  if (d.users.empty()) {
    throw InvalidInput("cannot train on an empty dataset");
  }
  if (d.feature_dim < 1) {
    throw InvalidInput("dataset feature dimension must be at least 1");
  }
  for (const UserRecord& user : d.users) {
    if (user.observations.empty()) {
      throw InvalidInput("user '" + user.id + "' has no observations");
    }
  }

  TrainResult result;
  bool have_best = false;
  for (std::size_t restart = 0; restart < h.restarts; ++restart) {
    const std::uint64_t seed = h.seed + restart;
    ModelParams params;
    RestartSummary summary = run_restart(d, h, seed, workers, params);
    const bool better =
        !have_best || summary.final_objective > result.final_objective;
    if (better) {
      result.params = std::move(params);
      result.trace = summary.trace;
      result.final_objective = summary.final_objective;
      result.winning_seed = seed;
      have_best = true;
    }
    result.restarts.push_back(std::move(summary));
  }
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open trace file for writing: " + path.string());
  }
  out << "iteration,objective,max_abs_grad,seconds\n";
  char buf[160];
  for (const TraceRow& row : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.6f\n", row.iteration,
                  row.objective, row.max_abs_grad, row.seconds);
    out << buf;
  }
}

}  // namespace groupmix
