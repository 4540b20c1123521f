#include "groupmix/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "groupmix/errors.hpp"
#include "groupmix/rng.hpp"

#include "json.hpp"

namespace groupmix {

namespace {

constexpr int kDatasetSchemaVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& message) {
  throw LoadError(path.string() + ":" + std::to_string(line) + ": " + message);
}

// Sparse feature notation: whitespace-separated "index:value" pairs.
std::vector<double> parse_sparse_features(const std::string& text,
                                          std::size_t feature_dim) {
  std::vector<double> dense(feature_dim, 0.0);
  std::vector<bool> seen(feature_dim, false);
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const std::size_t colon = token.find(':');
    if (colon == std::string::npos || colon == 0 ||
        colon + 1 == token.size()) {
      throw InvalidInput("malformed sparse feature token '" + token + "'");
    }
    std::size_t idx_end = 0;
    long idx = -1;
    try {
      idx = std::stol(token.substr(0, colon), &idx_end);
    } catch (const std::exception&) {
      throw InvalidInput("malformed sparse feature index in '" + token + "'");
    }
    if (idx_end != colon || idx < 0) {
      throw InvalidInput("malformed sparse feature index in '" + token + "'");
    }
    if (static_cast<std::size_t>(idx) >= feature_dim) {
      throw InvalidInput("feature index " + std::to_string(idx) +
                         " out of range for feature_dim " +
                         std::to_string(feature_dim));
    }
    std::size_t val_end = 0;
    double value = 0.0;
    const std::string val_text = token.substr(colon + 1);
    try {
      value = std::stod(val_text, &val_end);
    } catch (const std::exception&) {
      throw InvalidInput("malformed sparse feature value in '" + token + "'");
    }
    if (val_end != val_text.size() || !std::isfinite(value)) {
      throw InvalidInput("malformed sparse feature value in '" + token + "'");
    }
    if (seen[static_cast<std::size_t>(idx)]) {
      throw InvalidInput("duplicate feature index " + std::to_string(idx));
    }
    seen[static_cast<std::size_t>(idx)] = true;
    dense[static_cast<std::size_t>(idx)] = value;
  }
  return dense;
}

std::vector<double> parse_features(const nlohmann::json& j,
                                   std::size_t feature_dim) {
  if (j.is_string()) {
    return parse_sparse_features(j.get<std::string>(), feature_dim);
  }
  if (!j.is_array()) {
    throw InvalidInput("features must be a dense array or a sparse string");
  }
  auto dense = j.get<std::vector<double>>();
  if (dense.size() != feature_dim) {
    throw InvalidInput("dense feature vector has " +
                       std::to_string(dense.size()) +
                       " entries, expected feature_dim " +
                       std::to_string(feature_dim));
  }
  for (double v : dense) {
    if (!std::isfinite(v)) {
      throw InvalidInput("non-finite feature value");
    }
  }
  return dense;
}

}  // namespace

std::string_view task_name(TaskKind task) noexcept {
  return task == TaskKind::multiclass ? "multiclass" : "binary-attribute";
}

std::optional<TaskKind> parse_task(std::string_view name) noexcept {
  if (name == "multiclass") {
    return TaskKind::multiclass;
  }
  if (name == "binary-attribute") {
    return TaskKind::binary_attribute;
  }
  return std::nullopt;
}

std::size_t Dataset::num_observations() const noexcept {
  std::size_t total = 0;
  for (const UserRecord& u : users) {
    total += u.observations.size();
  }
  return total;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("cannot open dataset file: " + path.string());
  }

  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw LoadError(path.string() + ": empty file, expected a header line");
  }
  ++line_no;

  Dataset d;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("schema_version").get<int>() != kDatasetSchemaVersion) {
      fail(path, line_no,
           "unsupported schema_version " + header["schema_version"].dump());
    }
    d.feature_dim = header.at("feature_dim").get<std::size_t>();
    if (d.feature_dim < 1) {
      fail(path, line_no, "feature_dim must be at least 1");
    }
    d.feature_names =
        header.at("feature_names").get<std::vector<std::string>>();
    if (d.feature_names.size() != d.feature_dim) {
      fail(path, line_no,
           std::to_string(d.feature_names.size()) +
               " feature names for feature_dim " +
               std::to_string(d.feature_dim));
    }
    const auto task = parse_task(header.at("task").get<std::string>());
    if (!task) {
      fail(path, line_no,
           "unknown task kind " + header["task"].dump() +
               " (expected \"multiclass\" or \"binary-attribute\")");
    }
    d.task = *task;
  } catch (const nlohmann::json::exception& e) {
    fail(path, line_no, std::string("malformed header: ") + e.what());
  }

  std::unordered_map<std::string, std::size_t> user_index;
  std::unordered_map<std::string, long long> last_seq;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const nlohmann::json rec = nlohmann::json::parse(line);
      const auto user = rec.at("user").get<std::string>();
      if (user.empty()) {
        fail(path, line_no, "empty user id");
      }
      const auto seq = rec.at("seq").get<long long>();
      const auto observed = rec.at("observed").get<int>();

      const nlohmann::json& cand_json = rec.at("candidates");
      if (!cand_json.is_array()) {
        fail(path, line_no, "candidates must be an array");
      }
      std::vector<Candidate> candidates;
      candidates.reserve(cand_json.size());
      for (const nlohmann::json& cj : cand_json) {
        Candidate c;
        c.id = cj.at("id").get<int>();
        c.features = parse_features(cj.at("features"), d.feature_dim);
        candidates.push_back(std::move(c));
      }
      Stimulus stimulus(std::move(candidates));
      if (stimulus.index_of(observed) < 0) {
        fail(path, line_no,
             "observed id " + std::to_string(observed) +
                 " absent from candidates");
      }
      if (d.task == TaskKind::binary_attribute) {
        if (stimulus.size() != 2 || stimulus.index_of(0) < 0 ||
            stimulus.index_of(1) < 0) {
          fail(path, line_no,
               "binary-attribute records need exactly two candidates with "
               "ids 0 and 1");
        }
      }

      auto it = user_index.find(user);
      if (it == user_index.end()) {
        it = user_index.emplace(user, d.users.size()).first;
        d.users.push_back({user, {}});
        last_seq.emplace(user, seq);
      } else {
        if (seq <= last_seq[user]) {
          fail(path, line_no,
               "sequence number " + std::to_string(seq) + " for user '" +
                   user + "' does not increase (previous " +
                   std::to_string(last_seq[user]) + ")");
        }
        last_seq[user] = seq;
      }
      d.users[it->second].observations.push_back(
          {std::move(stimulus), observed});
    } catch (const nlohmann::json::exception& e) {
      fail(path, line_no, std::string("malformed record: ") + e.what());
    } catch (const InvalidInput& e) {
      fail(path, line_no, e.what());
    }
  }

  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open dataset file for writing: " + path.string());
  }
  nlohmann::json header;
  header["schema_version"] = kDatasetSchemaVersion;
  header["feature_dim"] = d.feature_dim;
  header["feature_names"] = d.feature_names;
  header["task"] = std::string(task_name(d.task));
  out << header.dump() << "\n";

  for (const UserRecord& user : d.users) {
    long long seq = 0;
    for (const Observation& obs : user.observations) {
      nlohmann::json rec;
      rec["user"] = user.id;
      rec["seq"] = seq++;
      rec["observed"] = obs.observed;
      nlohmann::json candidates = nlohmann::json::array();
      for (const Candidate& c : obs.stimulus.candidates()) {
        candidates.push_back({{"id", c.id}, {"features", c.features}});
      }
      rec["candidates"] = std::move(candidates);
      out << rec.dump() << "\n";
    }
  }
}

std::vector<FoldPair> split_user_folds(const Dataset& d, std::size_t folds,
                                       std::uint64_t seed) {
  const std::size_t num_users = d.num_users();
  if (folds < 2) {
    throw InvalidInput("need at least 2 folds, got " + std::to_string(folds));
  }
  if (folds > num_users) {
    throw InvalidInput("cannot split " + std::to_string(num_users) +
                       " users into " + std::to_string(folds) + " folds");
  }

  std::vector<std::size_t> order(num_users);
  for (std::size_t i = 0; i < num_users; ++i) {
    order[i] = i;
  }
  Rng rng(seed);
  rng.shuffle(order);

  // Contiguous blocks of the shuffled order; the first (num_users % folds)
  // folds take one extra user.
  std::vector<std::size_t> fold_of_user(num_users);
  const std::size_t base = num_users / folds;
  const std::size_t extra = num_users % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      fold_of_user[order[pos++]] = f;
    }
  }

  std::vector<FoldPair> pairs(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    Dataset& train = pairs[f].train;
    Dataset& test = pairs[f].test;
    for (Dataset* part : {&train, &test}) {
      part->feature_dim = d.feature_dim;
      part->feature_names = d.feature_names;
      part->task = d.task;
    }
    for (std::size_t u = 0; u < num_users; ++u) {
      (fold_of_user[u] == f ? test : train).users.push_back(d.users[u]);
    }
  }
  return pairs;
}

void SyntheticConfig::validate() const {
  if (num_users < 1 || obs_per_user < 1) {
    throw InvalidInput("synthetic generator needs at least one user and one "
                       "observation per user");
  }
  if (candidates_per_scene < 2) {
    throw InvalidInput("candidates_per_scene must be at least 2, got " +
                       std::to_string(candidates_per_scene));
  }
  if (fraction_max_group < 0.0 || fraction_max_group > 1.0) {
    throw InvalidInput("fraction_max_group must lie in [0, 1]");
  }
  const double product =
      static_cast<double>(num_users) * fraction_max_group;
  if (std::abs(product - std::round(product)) > 1e-9) {
    throw InvalidInput("num_users * fraction_max_group must be integral");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw InvalidInput("noise_rate must lie in [0, 1)");
  }
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();

  SyntheticData out;
  Dataset& d = out.dataset;
  d.feature_dim = 1 + cfg.distractor_features;
  d.feature_names.push_back("salience");
  for (std::size_t i = 0; i < cfg.distractor_features; ++i) {
    d.feature_names.push_back("noise_" + std::to_string(i));
  }
  d.task = TaskKind::multiclass;

  const auto max_group_users = static_cast<std::size_t>(std::llround(
      static_cast<double>(cfg.num_users) * cfg.fraction_max_group));

  std::size_t id_width = 1;
  for (std::size_t v = cfg.num_users > 0 ? cfg.num_users - 1 : 0; v >= 10;
       v /= 10) {
    ++id_width;
  }

  Rng rng(cfg.seed);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    UserRecord user;
    std::string digits = std::to_string(u);
    user.id = "u" + std::string(id_width - digits.size(), '0') + digits;
    const int group = u < max_group_users ? 0 : 1;

    for (std::size_t k = 0; k < cfg.obs_per_user; ++k) {
      std::vector<double> salience(cfg.candidates_per_scene);
      for (std::size_t c = 0; c < cfg.candidates_per_scene; ++c) {
        double v;
        bool fresh;
        do {
          v = rng.uniform01();
          fresh = true;
          for (std::size_t j = 0; j < c; ++j) {
            if (salience[j] == v) {
              fresh = false;
              break;
            }
          }
        } while (!fresh);
        salience[c] = v;
      }

      std::vector<Candidate> candidates(cfg.candidates_per_scene);
      for (std::size_t c = 0; c < cfg.candidates_per_scene; ++c) {
        candidates[c].id = static_cast<int>(c);
        candidates[c].features.reserve(d.feature_dim);
        candidates[c].features.push_back(salience[c]);
        for (std::size_t i = 0; i < cfg.distractor_features; ++i) {
          candidates[c].features.push_back(rng.uniform01());
        }
      }

      std::size_t pick = 0;
      for (std::size_t c = 1; c < cfg.candidates_per_scene; ++c) {
        const bool better =
            group == 0 ? salience[c] > salience[pick] : salience[c] < salience[pick];
        if (better) {
          pick = c;
        }
      }
      if (cfg.noise_rate > 0.0 && rng.uniform01() < cfg.noise_rate) {
        pick = rng.below(cfg.candidates_per_scene);
      }

      user.observations.push_back(
          {Stimulus(std::move(candidates)), static_cast<int>(pick)});
    }

    d.users.push_back(std::move(user));
    out.user_group.push_back(group);
  }

  return out;
}

void save_truth(const SyntheticData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open truth file for writing: " + path.string());
  }
  for (std::size_t u = 0; u < data.dataset.users.size(); ++u) {
    out << data.dataset.users[u].id << "\t" << data.user_group[u] << "\n";
  }
}

}  // namespace groupmix
