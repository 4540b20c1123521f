#include "groupmix/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>

#include "groupmix/errors.hpp"
#include "groupmix/kernels.hpp"

namespace groupmix {

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;  // 1 / (s . y)
};

// Two-loop recursion; dir <- -H * grad. With empty history this is plain
// steepest descent, otherwise the initial Hessian is scaled by the newest
// pair's s.y / y.y.
void two_loop_direction(const std::deque<CurvaturePair>& history,
                        std::span<const double> grad,
                        std::vector<double>& dir,
                        std::vector<double>& alpha_buf) {
  dir.assign(grad.begin(), grad.end());
  if (!history.empty()) {
    alpha_buf.resize(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha_buf[i] = history[i].rho * kernels::dot(history[i].s, dir);
      kernels::axpy(-alpha_buf[i], history[i].y, dir);
    }
    const CurvaturePair& newest = history.back();
    const double gamma =
        1.0 / (newest.rho * kernels::dot(newest.y, newest.y));
    for (double& d : dir) {
      d *= gamma;
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * kernels::dot(history[i].y, dir);
      kernels::axpy(alpha_buf[i] - beta, history[i].s, dir);
    }
  }
  for (double& d : dir) {
    d = -d;
  }
}

// Strong Wolfe line search: bracketing plus a zoom phase that interpolates
// with the secant on derivatives (exact for quadratics) and falls back to
// bisection when the interpolant is degenerate or the bracket stalls.
class LineSearch {
 public:
  LineSearch(const ObjectiveFn& f, std::span<const double> x0,
             std::span<const double> dir, double f0, double df0,
             const OptimizerConfig& cfg)
      : f_(f),
        x0_(x0),
        dir_(dir),
        f0_(f0),
        df0_(df0),
        cfg_(cfg),
        x_(x0.size()),
        g_(x0.size()) {}

  bool search(double alpha_init) {
    double alpha_prev = 0.0;
    double phi_prev = f0_;
    double dphi_prev = df0_;
    double alpha = alpha_init;
    bool first = true;

    while (evals_ < cfg_.max_backtracks) {
      const auto [phi, dphi] = eval(alpha);
      if (!std::isfinite(phi) || phi > f0_ + cfg_.c1 * alpha * df0_ ||
          (!first && phi >= phi_prev)) {
        return zoom(alpha_prev, phi_prev, dphi_prev, alpha, dphi);
      }
      if (std::abs(dphi) <= -cfg_.c2 * df0_) {
        refine_and_accept(alpha, phi, dphi, alpha_prev, dphi_prev);
        return true;
      }
      if (dphi >= 0.0) {
        return zoom(alpha, phi, dphi, alpha_prev, dphi_prev);
      }
      alpha_prev = alpha;
      phi_prev = phi;
      dphi_prev = dphi;
      alpha = std::min(2.0 * alpha, 1e20);
      first = false;
    }
    return false;
  }

  double accepted_alpha() const noexcept { return accepted_alpha_; }
  double accepted_value() const noexcept { return accepted_value_; }
  const std::vector<double>& x() const noexcept { return accepted_x_; }
  const std::vector<double>& g() const noexcept { return accepted_g_; }

  bool has_fallback() const noexcept { return best_value_ < f0_; }
  double best_value() const noexcept { return best_value_; }
  const std::vector<double>& best_x() const noexcept { return best_x_; }
  const std::vector<double>& best_g() const noexcept { return best_g_; }
  double best_alpha() const noexcept { return best_alpha_; }

 private:
  std::pair<double, double> eval(double alpha) {
    ++evals_;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      x_[i] = x0_[i] + alpha * dir_[i];
    }
    const double phi = f_(x_, g_);
    const double dphi = kernels::dot(g_, dir_);
    if (std::isfinite(phi) && phi < best_value_) {
      best_value_ = phi;
      best_alpha_ = alpha;
      best_x_ = x_;
      best_g_ = g_;
    }
    return {phi, dphi};
  }

  // Snapshots the evaluation buffers; call right after eval(alpha).
  void accept(double alpha, double phi) {
    accepted_alpha_ = alpha;
    accepted_value_ = phi;
    accepted_x_ = x_;
    accepted_g_ = g_;
  }

  // A Wolfe point is in hand, but the step may be loose (c2 = 0.9 accepts
  // early). One secant step on the derivative lands on the exact 1-d
  // minimizer for quadratic objectives. Keep the refined point only if it
  // is also a Wolfe point and not worse.
  void refine_and_accept(double alpha, double phi, double dphi,
                         double alpha_other, double dphi_other) {
    accept(alpha, phi);
    if (evals_ >= cfg_.max_backtracks || dphi == dphi_other) {
      return;
    }
    const double alpha_star =
        alpha - dphi * (alpha - alpha_other) / (dphi - dphi_other);
    if (!std::isfinite(alpha_star) || alpha_star <= 0.0 ||
        std::abs(alpha_star - alpha) <= 1e-12 * std::abs(alpha)) {
      return;
    }
    const auto [phi_star, dphi_star] = eval(alpha_star);
    if (std::isfinite(phi_star) && phi_star <= phi &&
        phi_star <= f0_ + cfg_.c1 * alpha_star * df0_ &&
        std::abs(dphi_star) <= -cfg_.c2 * df0_) {
      accept(alpha_star, phi_star);
    }
  }

  bool zoom(double alpha_lo, double phi_lo, double dphi_lo, double alpha_hi,
            double dphi_hi) {
    double width_prev = std::abs(alpha_hi - alpha_lo);
    bool force_bisect = false;

    while (evals_ < cfg_.max_backtracks) {
      double alpha;
      const double lo = std::min(alpha_lo, alpha_hi);
      const double hi = std::max(alpha_lo, alpha_hi);
      const double width = hi - lo;
      const double margin = 1e-3 * width;
      if (!force_bisect && std::isfinite(dphi_hi) &&
          dphi_hi != dphi_lo) {
        alpha = alpha_lo - dphi_lo * (alpha_hi - alpha_lo) /
                               (dphi_hi - dphi_lo);
        if (!std::isfinite(alpha) || alpha <= lo + margin ||
            alpha >= hi - margin) {
          alpha = 0.5 * (alpha_lo + alpha_hi);
        }
      } else {
        alpha = 0.5 * (alpha_lo + alpha_hi);
      }
      force_bisect = false;

      const auto [phi, dphi] = eval(alpha);
      if (!std::isfinite(phi) || phi > f0_ + cfg_.c1 * alpha * df0_ ||
          phi >= phi_lo) {
        alpha_hi = alpha;
        dphi_hi = dphi;
      } else {
        if (std::abs(dphi) <= -cfg_.c2 * df0_) {
          accept(alpha, phi);
          return true;
        }
        if (dphi * (alpha_hi - alpha_lo) >= 0.0) {
          alpha_hi = alpha_lo;
          dphi_hi = dphi_lo;
        }
        alpha_lo = alpha;
        phi_lo = phi;
        dphi_lo = dphi;
      }

      const double new_width = std::abs(alpha_hi - alpha_lo);
      if (new_width > 0.66 * width_prev) {
        force_bisect = true;
      }
      width_prev = new_width;
      if (new_width <= 1e-16 * std::max(1.0, std::abs(alpha_lo))) {
        break;  // bracket collapsed without a Wolfe point
      }
    }
    return false;
  }

  const ObjectiveFn& f_;
  std::span<const double> x0_;
  std::span<const double> dir_;
  double f0_;
  double df0_;
  const OptimizerConfig& cfg_;

  std::vector<double> x_;
  std::vector<double> g_;
  std::size_t evals_ = 0;

  double accepted_alpha_ = 0.0;
  double accepted_value_ = 0.0;
  std::vector<double> accepted_x_;
  std::vector<double> accepted_g_;

  double best_value_ = std::numeric_limits<double>::infinity();
  double best_alpha_ = 0.0;
  std::vector<double> best_x_;
  std::vector<double> best_g_;
};

}  // namespace

void OptimizerConfig::validate() const {
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw InvalidInput("line search constants must satisfy 0 < c1 < c2 < 1");
  }
  if (memory < 1) {
    throw InvalidInput("optimizer memory must be at least 1");
  }
  if (max_backtracks < 1) {
    throw InvalidInput("max_backtracks must be at least 1");
  }
  if (grad_tol < 0.0) {
    throw InvalidInput("grad_tol must be nonnegative");
  }
}

OptResult minimize(const ObjectiveFn& f, std::vector<double> x0,
                   const OptimizerConfig& cfg) {
  cfg.validate();
  const std::size_t n = x0.size();

  OptResult res;
  res.x = std::move(x0);
  res.gradient.assign(n, 0.0);
  res.value = f(res.x, res.gradient);
  if (!std::isfinite(res.value)) {
    throw InvalidInput("objective is not finite at the starting point");
  }
  for (double g : res.gradient) {
    if (!std::isfinite(g)) {
      throw InvalidInput("gradient is not finite at the starting point");
    }
  }

  std::deque<CurvaturePair> history;
  std::vector<double> dir(n);
  std::vector<double> alpha_buf;

  while (res.iterations < cfg.max_steps) {
    if (inf_norm(res.gradient) <= cfg.grad_tol) {
      break;
    }

    two_loop_direction(history, res.gradient, dir, alpha_buf);
    double dg = kernels::dot(dir, res.gradient);
    if (dg >= 0.0) {
      // stale curvature produced an ascent direction; restart from -g
      history.clear();
      for (std::size_t i = 0; i < n; ++i) {
        dir[i] = -res.gradient[i];
      }
      dg = kernels::dot(dir, res.gradient);
      if (dg >= 0.0) {
        break;  // gradient is numerically zero
      }
    }

    double alpha_init = 1.0;
    if (history.empty()) {
      const double gnorm = std::sqrt(kernels::squared_norm(res.gradient));
      alpha_init = std::min(1.0, 1.0 / std::max(gnorm, 1e-12));
    }

    LineSearch ls(f, res.x, dir, res.value, dg, cfg);
    if (!ls.search(alpha_init)) {
      res.line_search_failed = true;
      if (ls.has_fallback()) {
        res.x = ls.best_x();
        res.value = ls.best_value();
        res.gradient = ls.best_g();
        ++res.iterations;
        res.trace.push_back(
            {res.value, inf_norm(res.gradient), ls.best_alpha()});
      }
      break;
    }

    CurvaturePair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = ls.x()[i] - res.x[i];
      pair.y[i] = ls.g()[i] - res.gradient[i];
    }
    const double sy = kernels::dot(pair.s, pair.y);
    if (sy > 1e-10) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > cfg.memory) {
        history.pop_front();
      }
    }

    res.x = ls.x();
    res.value = ls.accepted_value();
    res.gradient = ls.g();
    ++res.iterations;
    res.trace.push_back(
        {res.value, inf_norm(res.gradient), ls.accepted_alpha()});
  }

  return res;
}

}  // namespace groupmix
