#pragma once

// Test-only oracles, kept independent of the library's log-space paths:
// plain-arithmetic enumeration for the mixture objective and e-step,
// central finite differences for gradients, and a direct (non-EM) MAP fit
// of the single-group model.

#include <cmath>
#include <functional>
#include <vector>

#include "groupmix/data.hpp"
#include "groupmix/loglinear.hpp"
#include "groupmix/optimizer.hpp"
#include "groupmix/rng.hpp"
#include "groupmix/training.hpp"

namespace oracles {

// P(candidate | stimulus; w) by direct exponentiation, no max shift.
inline std::vector<double> plain_distribution(const groupmix::Stimulus& s,
                                              const std::vector<double>& w) {
  std::vector<double> p(s.size());
  double z = 0.0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    double score = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      score += w[i] * s.candidates()[c].features[i];
    }
    p[c] = std::exp(score);
    z += p[c];
  }
  for (double& v : p) {
    v /= z;
  }
  return p;
}

inline std::vector<double> plain_group_prior(const std::vector<double>& pi) {
  std::vector<double> p(pi.size());
  double z = 0.0;
  for (std::size_t g = 0; g < pi.size(); ++g) {
    p[g] = std::exp(pi[g]);
    z += p[g];
  }
  for (double& v : p) {
    v /= z;
  }
  return p;
}

// Per-user likelihood sum_g P(g) prod_d P(b_d|s_d; rho_g), plain products.
inline double plain_user_likelihood(const groupmix::UserRecord& user,
                                    const groupmix::ModelParams& m) {
  const std::vector<double> prior = plain_group_prior(m.pi);
  double total = 0.0;
  for (std::size_t g = 0; g < m.num_groups(); ++g) {
    double prod = prior[g];
    for (const groupmix::Observation& obs : user.observations) {
      const std::vector<double> p =
          plain_distribution(obs.stimulus, m.group_weights[g]);
      prod *= p[static_cast<std::size_t>(
          obs.stimulus.index_of(obs.observed))];
    }
    total += prod;
  }
  return total;
}

inline double brute_force_objective(const groupmix::Dataset& d,
                                    const groupmix::ModelParams& m,
                                    const groupmix::Hyperparams& h) {
  double value = 0.0;
  for (const groupmix::UserRecord& user : d.users) {
    value += std::log(plain_user_likelihood(user, m));
  }
  double pi_norm = 0.0;
  for (double x : m.pi) {
    pi_norm += x * x;
  }
  value -= pi_norm / (2.0 * h.sigma_pi);
  for (const auto& w : m.group_weights) {
    double norm = 0.0;
    for (double x : w) {
      norm += x * x;
    }
    value -= norm / (2.0 * h.sigma_rho);
  }
  return value;
}

inline std::vector<std::vector<double>> brute_force_responsibilities(
    const groupmix::Dataset& d, const groupmix::ModelParams& m) {
  const std::vector<double> prior = plain_group_prior(m.pi);
  std::vector<std::vector<double>> rows;
  for (const groupmix::UserRecord& user : d.users) {
    std::vector<double> row(m.num_groups());
    double z = 0.0;
    for (std::size_t g = 0; g < m.num_groups(); ++g) {
      double prod = prior[g];
      for (const groupmix::Observation& obs : user.observations) {
        const std::vector<double> p =
            plain_distribution(obs.stimulus, m.group_weights[g]);
        prod *= p[static_cast<std::size_t>(
            obs.stimulus.index_of(obs.observed))];
      }
      row[g] = prod;
      z += prod;
    }
    for (double& v : row) {
      v /= z;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Central finite differences of a scalar function.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double hi = f(x);
    x[i] = orig - h;
    const double lo = f(x);
    x[i] = orig;
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

// |a - b| / max(1, |b|): relative for large magnitudes, absolute near zero.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

// MAP fit of the basic single-group model, bypassing the EM machinery:
// minimizes -sum log P + ||w||^2 / (2 sigma) from w = 0 until the gradient
// is essentially zero.
inline std::vector<double> direct_map_fit(const groupmix::Dataset& d,
                                          double sigma_rho) {
  const groupmix::ObjectiveFn f = [&](std::span<const double> x,
                                      std::span<double> grad) {
    const std::vector<double> w(x.begin(), x.end());
    std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    for (const groupmix::UserRecord& user : d.users) {
      for (const groupmix::Observation& obs : user.observations) {
        const std::vector<double> logp =
            groupmix::log_distribution(obs.stimulus, w);
        value -= logp[static_cast<std::size_t>(
            obs.stimulus.index_of(obs.observed))];
        const std::vector<double> g =
            groupmix::grad_log_prob(obs.stimulus, obs.observed, w);
        for (std::size_t i = 0; i < g.size(); ++i) {
          grad[i] -= g[i];
        }
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      value += w[i] * w[i] / (2.0 * sigma_rho);
      grad[i] += w[i] / sigma_rho;
    }
    return value;
  };
  groupmix::OptimizerConfig cfg;
  cfg.max_steps = 2000;
  cfg.grad_tol = 1e-10;
  return groupmix::minimize(f, std::vector<double>(d.feature_dim, 0.0), cfg).x;
}

// Random small instances shared by the oracle-equivalence and gradient
// tests.
inline groupmix::Stimulus random_stimulus(groupmix::Rng& rng,
                                          std::size_t num_candidates,
                                          std::size_t feature_dim,
                                          double scale = 2.0) {
  std::vector<groupmix::Candidate> candidates(num_candidates);
  for (std::size_t c = 0; c < num_candidates; ++c) {
    candidates[c].id = static_cast<int>(c);
    candidates[c].features.resize(feature_dim);
    for (double& v : candidates[c].features) {
      v = rng.uniform(-scale, scale);
    }
  }
  return groupmix::Stimulus(std::move(candidates));
}

inline groupmix::Dataset random_dataset(groupmix::Rng& rng,
                                        std::size_t max_users,
                                        std::size_t max_obs,
                                        std::size_t max_candidates,
                                        std::size_t max_dim) {
  groupmix::Dataset d;
  d.feature_dim = 1 + rng.below(max_dim);
  for (std::size_t i = 0; i < d.feature_dim; ++i) {
    d.feature_names.push_back("f" + std::to_string(i));
  }
  const std::size_t num_users = 1 + rng.below(max_users);
  for (std::size_t u = 0; u < num_users; ++u) {
    groupmix::UserRecord user;
    user.id = "u" + std::to_string(u);
    const std::size_t num_obs = 1 + rng.below(max_obs);
    for (std::size_t o = 0; o < num_obs; ++o) {
      const std::size_t num_candidates = 2 + rng.below(max_candidates - 1);
      groupmix::Stimulus s =
          random_stimulus(rng, num_candidates, d.feature_dim);
      const int observed = static_cast<int>(rng.below(num_candidates));
      user.observations.push_back({std::move(s), observed});
    }
    d.users.push_back(std::move(user));
  }
  return d;
}

inline groupmix::ModelParams random_params(groupmix::Rng& rng, std::size_t k,
                                           std::size_t feature_dim,
                                           double scale = 1.0) {
  groupmix::ModelParams m;
  m.pi.resize(k);
  for (double& x : m.pi) {
    x = rng.uniform(-scale, scale);
  }
  m.group_weights.resize(k);
  for (auto& w : m.group_weights) {
    w.resize(feature_dim);
    for (double& x : w) {
      x = rng.uniform(-scale, scale);
    }
  }
  return m;
}

}  // namespace oracles
