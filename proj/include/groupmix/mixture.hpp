#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "groupmix/loglinear.hpp"

#include "json.hpp"

namespace groupmix {

/// Full parameter set of a trained group model: the group-weight vector
/// (softmaxed into the prior over groups) plus one behavior weight vector
/// per group. Immutable after training; safe to share across threads.
struct ModelParams {
  std::vector<double> pi;                          // length K
  std::vector<WeightVector> group_weights;         // K vectors of length n

  std::size_t num_groups() const noexcept { return pi.size(); }
  std::size_t feature_dim() const noexcept {
    return group_weights.empty() ? 0 : group_weights.front().size();
  }

  /// Throws InvalidInput on inconsistent sizes or non-finite entries.
  void validate() const;
};

/// One user response to one stimulus.
struct Observation {
  Stimulus stimulus;
  int observed;
};

/// Per-user belief over group membership, maintained in log space: the
/// running per-group log-likelihood of everything this user has done, from
/// which the normalized posterior is recomputed after each update. Updating
/// is therefore order-independent up to float roundoff.
struct PosteriorState {
  std::vector<double> probs;              // posterior over groups, sums to 1
  std::vector<double> log_lik_per_group;  // sum of log P(b|s;rho_g) so far
  std::size_t num_observations = 0;
};

/// Prior distribution over groups: softmax of the group-weight vector.
std::vector<double> group_prior(const std::vector<double>& pi);

/// Fresh state for a user we have never observed: posterior = prior.
PosteriorState make_posterior(const ModelParams& m);

/// Mixture prediction for a brand-new user: per-group distributions
/// weighted by the group prior.
std::vector<double> predict_new_user(const Stimulus& s, const ModelParams& m);

/// Folds one observation into the user's state and renormalizes the
/// posterior in log space.
PosteriorState posterior_update(const PosteriorState& state,
                                const Observation& obs, const ModelParams& m);

/// Mixture prediction weighted by the user's current posterior.
std::vector<double> predict_adapted(const Stimulus& s,
                                    const PosteriorState& state,
                                    const ModelParams& m);

/// Shannon entropy of the group posterior, in nats. 0 log 0 = 0.
double posterior_entropy(const PosteriorState& state);

/// Model file contents: parameters plus the feature names and training
/// metadata (hyperparameters, seed, final objective) they were fit with.
struct ModelFile {
  ModelParams params;
  std::vector<std::string> feature_names;
  nlohmann::json metadata;
};

/// Versioned single-file JSON format. Weights are written with
/// shortest-round-trip decimal encoding, so save/load preserves them
/// bit-exactly.
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace groupmix
