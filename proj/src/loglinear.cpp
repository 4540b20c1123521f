#include "groupmix/loglinear.hpp"

#include <cmath>
#include <string>

#include "groupmix/errors.hpp"
#include "groupmix/kernels.hpp"

namespace groupmix {

Stimulus::Stimulus(std::vector<Candidate> candidates)
    : candidates_(std::move(candidates)) {
  if (candidates_.size() < 2) {
    throw InvalidInput("stimulus must have at least two candidates, got " +
                       std::to_string(candidates_.size()));
  }
  const std::size_t dim = candidates_.front().features.size();
  for (const Candidate& c : candidates_) {
    if (c.id < 0) {
      throw InvalidInput("candidate id must be non-negative, got " +
                         std::to_string(c.id));
    }
    if (c.features.size() != dim) {
      throw InvalidInput(
          "candidates disagree on feature dimension: " + std::to_string(dim) +
          " vs " + std::to_string(c.features.size()));
    }
  }
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates_.size(); ++j) {
      if (candidates_[i].id == candidates_[j].id) {
        throw InvalidInput("duplicate candidate id " +
                           std::to_string(candidates_[i].id) +
                           " within one stimulus");
      }
    }
  }
}

int Stimulus::index_of(int id) const noexcept {
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (candidates_[i].id == id) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

void log_distribution_into(const Stimulus& s, const WeightVector& w,
                           std::span<double> out) {
  if (w.size() != s.feature_dim()) {
    throw InvalidInput("weight dimension " + std::to_string(w.size()) +
                       " does not match stimulus feature dimension " +
                       std::to_string(s.feature_dim()));
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = kernels::dot(w, s.candidates()[i].features);
  }
  const double lse = kernels::log_sum_exp(out);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] -= lse;
  }
}

std::vector<double> log_distribution(const Stimulus& s,
                                     const WeightVector& w) {
  std::vector<double> out(s.size());
  log_distribution_into(s, w, out);
  return out;
}

int predict(const Stimulus& s, std::span<const double> dist) {
  if (dist.size() != s.size()) {
    throw InvalidInput("distribution has " + std::to_string(dist.size()) +
                       " entries for a stimulus with " +
                       std::to_string(s.size()) + " candidates");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) {
      best = i;
    }
  }
  return s.candidates()[best].id;
}

std::vector<double> grad_log_prob(const Stimulus& s, int observed,
                                  const WeightVector& w) {
  const int idx = s.index_of(observed);
  if (idx < 0) {
    throw InvalidInput("unknown candidate id " + std::to_string(observed));
  }
  std::vector<double> logp(s.size());
  log_distribution_into(s, w, logp);
  std::vector<double> grad(s.feature_dim(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    kernels::axpy(-std::exp(logp[i]), s.candidates()[i].features, grad);
  }
  kernels::axpy(1.0, s.candidates()[static_cast<std::size_t>(idx)].features,
                grad);
  return grad;
}

BinaryEncoding encode_binary(std::span<const double> attr_features,
                             bool use_attribute) {
  if (attr_features.empty()) {
    throw InvalidInput("binary encoding requires a nonempty feature vector");
  }
  std::vector<double> pos(attr_features.begin(), attr_features.end());
  std::vector<double> neg(attr_features.size());
  for (std::size_t i = 0; i < attr_features.size(); ++i) {
    neg[i] = -attr_features[i];
  }
  std::vector<Candidate> candidates;
  candidates.push_back({kAttributeUsed, std::move(pos)});
  candidates.push_back({kAttributeUnused, std::move(neg)});
  return {Stimulus(std::move(candidates)),
          use_attribute ? kAttributeUsed : kAttributeUnused};
}

}  // namespace groupmix
