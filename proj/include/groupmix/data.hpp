#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groupmix/mixture.hpp"

namespace groupmix {

enum class TaskKind { multiclass, binary_attribute };

std::string_view task_name(TaskKind task) noexcept;
std::optional<TaskKind> parse_task(std::string_view name) noexcept;

/// One user's ordered interaction history.
struct UserRecord {
  std::string id;
  std::vector<Observation> observations;
};

/// A corpus of per-user histories over a shared feature space. Users
/// appear in file order; observations keep their within-user order.
struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<std::string> feature_names;
  TaskKind task = TaskKind::multiclass;
  std::vector<UserRecord> users;

  std::size_t num_users() const noexcept { return users.size(); }
  std::size_t num_observations() const noexcept;
};

/// Reads the JSON-Lines dataset format described in docs/FORMATS.md and
/// validates every record. Errors name the line number and the violated
/// rule.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes a dataset back out (always with dense feature arrays and
/// sequence numbers 0..N-1 per user). load(save(d)) reproduces d exactly,
/// including weight bits.
void save_dataset(const Dataset& d, const std::filesystem::path& path);

struct FoldPair {
  Dataset train;
  Dataset test;
};

/// User-disjoint cross-validation folds: users are shuffled by seed and cut
/// into `folds` blocks whose sizes differ by at most one. Each pair's test
/// block is disjoint from its training users, and the test blocks cover
/// every user exactly once.
std::vector<FoldPair> split_user_folds(const Dataset& d, std::size_t folds,
                                       std::uint64_t seed);

/// Configuration for the procedurally generated salience dataset: every
/// scene carries one salience feature plus i.i.d. noise features, and each
/// user deterministically picks either the highest- or the lowest-salience
/// candidate (flipped to a random candidate with probability noise_rate).
struct SyntheticConfig {
  std::size_t num_users = 100;
  std::size_t obs_per_user = 10;
  std::size_t candidates_per_scene = 5;
  double fraction_max_group = 0.5;  // num_users * fraction must be integral
  double noise_rate = 0.0;          // in [0, 1)
  std::size_t distractor_features = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generated dataset plus the ground-truth group of each user
/// (0 = picks max salience, 1 = picks min salience), aligned with
/// dataset.users. The labels are for evaluation only and are written to a
/// sidecar file, never consumed by training.
struct SyntheticData {
  Dataset dataset;
  std::vector<int> user_group;
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

/// Writes the ground-truth sidecar ("<user>\t<group>" per line).
void save_truth(const SyntheticData& data, const std::filesystem::path& path);

}  // namespace groupmix
