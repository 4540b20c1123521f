#include "groupmix/mixture.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "groupmix/errors.hpp"
#include "groupmix/kernels.hpp"

namespace groupmix {

namespace {

constexpr int kModelSchemaVersion = 1;

void check_same_groups(const PosteriorState& state, const ModelParams& m) {
  if (state.probs.size() != m.num_groups() ||
      state.log_lik_per_group.size() != m.num_groups()) {
    throw InvalidInput("posterior state has " +
                       std::to_string(state.probs.size()) +
                       " groups, model has " +
                       std::to_string(m.num_groups()));
  }
}

// Mixture of the per-group candidate distributions under the given
// group weights. Weights must sum to 1.
std::vector<double> mix_distributions(const Stimulus& s, const ModelParams& m,
                                      const std::vector<double>& weights) {
  if (m.feature_dim() != s.feature_dim()) {
    throw InvalidInput("model feature dimension " +
                       std::to_string(m.feature_dim()) +
                       " does not match stimulus feature dimension " +
                       std::to_string(s.feature_dim()));
  }
  std::vector<double> out(s.size(), 0.0);
  std::vector<double> logp(s.size());
  for (std::size_t g = 0; g < m.num_groups(); ++g) {
    log_distribution_into(s, m.group_weights[g], logp);
    for (std::size_t c = 0; c < s.size(); ++c) {
      out[c] += weights[g] * std::exp(logp[c]);
    }
  }
  return out;
}

}  // namespace

void ModelParams::validate() const {
  if (pi.empty()) {
    throw InvalidInput("model must have at least one group");
  }
  if (group_weights.size() != pi.size()) {
    throw InvalidInput("model has " + std::to_string(pi.size()) +
                       " prior weights but " +
                       std::to_string(group_weights.size()) +
                       " group weight vectors");
  }
  for (double x : pi) {
    if (!std::isfinite(x)) {
      throw InvalidInput("non-finite group prior weight");
    }
  }
  const std::size_t n = group_weights.front().size();
  for (const WeightVector& w : group_weights) {
    if (w.size() != n) {
      throw InvalidInput("group weight vectors disagree on dimension: " +
                         std::to_string(n) + " vs " +
                         std::to_string(w.size()));
    }
    for (double x : w) {
      if (!std::isfinite(x)) {
        throw InvalidInput("non-finite group weight");
      }
    }
  }
}

std::vector<double> group_prior(const std::vector<double>& pi) {
  if (pi.empty()) {
    throw InvalidInput("group prior requires a nonempty weight vector");
  }
  std::vector<double> out(pi.size());
  kernels::softmax(pi, out);
  return out;
}

PosteriorState make_posterior(const ModelParams& m) {
  PosteriorState state;
  state.probs = group_prior(m.pi);
  state.log_lik_per_group.assign(m.num_groups(), 0.0);
  state.num_observations = 0;
  return state;
}

std::vector<double> predict_new_user(const Stimulus& s, const ModelParams& m) {
  return mix_distributions(s, m, group_prior(m.pi));
}

PosteriorState posterior_update(const PosteriorState& state,
                                const Observation& obs, const ModelParams& m) {
  check_same_groups(state, m);
  const int idx = obs.stimulus.index_of(obs.observed);
  if (idx < 0) {
    throw InvalidInput("observed id " + std::to_string(obs.observed) +
                       " is not a candidate of its stimulus");
  }

  PosteriorState next;
  next.log_lik_per_group.resize(m.num_groups());
  std::vector<double> logp(obs.stimulus.size());
  for (std::size_t g = 0; g < m.num_groups(); ++g) {
    log_distribution_into(obs.stimulus, m.group_weights[g], logp);
    next.log_lik_per_group[g] =
        state.log_lik_per_group[g] + logp[static_cast<std::size_t>(idx)];
  }

  const double lse_pi = kernels::log_sum_exp(m.pi);
  std::vector<double> unnorm(m.num_groups());
  for (std::size_t g = 0; g < m.num_groups(); ++g) {
    unnorm[g] = (m.pi[g] - lse_pi) + next.log_lik_per_group[g];
  }
  next.probs.resize(m.num_groups());
  kernels::softmax(unnorm, next.probs);
  next.num_observations = state.num_observations + 1;
  return next;
}

std::vector<double> predict_adapted(const Stimulus& s,
                                    const PosteriorState& state,
                                    const ModelParams& m) {
  check_same_groups(state, m);
  return mix_distributions(s, m, state.probs);
}

double posterior_entropy(const PosteriorState& state) {
  double h = 0.0;
  for (double p : state.probs) {
    if (p > 0.0) {
      h -= p * std::log(p);
    }
  }
  return h;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  model.params.validate();
  nlohmann::json j;
  j["format"] = "groupmix-model";
  j["schema_version"] = kModelSchemaVersion;
  j["num_groups"] = model.params.num_groups();
  j["feature_dim"] = model.params.feature_dim();
  j["feature_names"] = model.feature_names;
  j["pi"] = model.params.pi;
  j["group_weights"] = model.params.group_weights;
  j["metadata"] = model.metadata;
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open model file for writing: " + path.string());
  }
  out << j.dump(2) << "\n";
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("cannot open model file: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "groupmix-model") {
      throw LoadError(path.string() + ": not a groupmix model file");
    }
    if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
      throw LoadError(path.string() + ": unsupported model schema version " +
                      j["schema_version"].dump());
    }
    ModelFile model;
    model.params.pi = j.at("pi").get<std::vector<double>>();
    model.params.group_weights =
        j.at("group_weights").get<std::vector<std::vector<double>>>();
    model.feature_names =
        j.at("feature_names").get<std::vector<std::string>>();
    if (j.contains("metadata")) {
      model.metadata = j["metadata"];
    }
    model.params.validate();
    const auto k = j.at("num_groups").get<std::size_t>();
    const auto n = j.at("feature_dim").get<std::size_t>();
    if (k != model.params.num_groups() || n != model.params.feature_dim()) {
      throw LoadError(path.string() +
                      ": header sizes disagree with stored parameters");
    }
    if (model.feature_names.size() != n) {
      throw LoadError(path.string() + ": " +
                      std::to_string(model.feature_names.size()) +
                      " feature names for feature_dim " + std::to_string(n));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": malformed model file: " + e.what());
  } catch (const InvalidInput& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace groupmix
