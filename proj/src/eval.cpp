#include "groupmix/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "groupmix/errors.hpp"
#include "groupmix/loglinear.hpp"
#include "groupmix/parallel.hpp"

#include "json.hpp"

namespace groupmix {

namespace {

void check_eval_inputs(const Dataset& test, const ModelParams& m) {
  if (test.users.empty()) {
    throw InvalidInput("cannot evaluate on an empty test set");
  }
  if (m.feature_dim() != test.feature_dim) {
    throw InvalidInput("model feature dimension " +
                       std::to_string(m.feature_dim()) +
                       " does not match dataset feature dimension " +
                       std::to_string(test.feature_dim));
  }
}

struct UserEval {
  std::vector<PredictionRecord> predictions;
};

void tally(const PredictionRecord& rec, TaskKind task, EvalReport& report) {
  if (report.positions.size() < rec.position) {
    report.positions.resize(rec.position);
  }
  PositionStats& pos = report.positions[rec.position - 1];
  ++pos.n;
  pos.entropy_sum += rec.entropy_before;
  ++report.total_observations;
  const bool is_correct = rec.predicted == rec.observed;
  if (is_correct) {
    ++report.correct;
    ++pos.correct;
  }
  if (task == TaskKind::binary_attribute) {
    const bool pred_pos = rec.predicted == kAttributeUsed;
    const bool gold_pos = rec.observed == kAttributeUsed;
    ConfusionCounts& c = pos.confusion;
    if (pred_pos && gold_pos) {
      ++c.tp;
      ++report.confusion.tp;
    } else if (pred_pos) {
      ++c.fp;
      ++report.confusion.fp;
    } else if (gold_pos) {
      ++c.fn;
      ++report.confusion.fn;
    } else {
      ++c.tn;
      ++report.confusion.tn;
    }
  }
}

EvalReport run_protocol(const Dataset& test, const ModelParams& m,
                        bool adapt, int workers) {
  check_eval_inputs(test, m);
  m.validate();

  // One slot per user; the final reduction walks users in dataset order,
  // so worker counts do not change the report.
  std::vector<UserEval> slots(test.num_users());
  parallel_for(test.num_users(), workers, [&](std::size_t u) {
    const UserRecord& user = test.users[u];
    PosteriorState state = make_posterior(m);
    UserEval& slot = slots[u];
    slot.predictions.reserve(user.observations.size());
    std::size_t position = 1;
    for (const Observation& obs : user.observations) {
      const std::vector<double> dist =
          adapt ? predict_adapted(obs.stimulus, state, m)
                : predict_new_user(obs.stimulus, m);
      const int predicted = predict(obs.stimulus, dist);
      slot.predictions.push_back({user.id, position, predicted, obs.observed,
                                  posterior_entropy(state)});
      if (adapt) {
        state = posterior_update(state, obs, m);
      }
      ++position;
    }
  });

  EvalReport report;
  report.task = test.task;
  for (const UserEval& slot : slots) {
    for (const PredictionRecord& rec : slot.predictions) {
      tally(rec, test.task, report);
      report.predictions.push_back(rec);
    }
  }
  return report;
}

std::string format_double(double v, const char* fmt = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::optional<double> EvalReport::overall_micro_f1() const {
  if (task != TaskKind::binary_attribute) {
    return std::nullopt;
  }
  return micro_f1(confusion);
}

double micro_f1(const ConfusionCounts& counts) {
  const double denom =
      static_cast<double>(2 * counts.tp + counts.fp + counts.fn);
  if (denom == 0.0) {
    return 0.0;  // precision + recall is 0 or undefined
  }
  return 2.0 * static_cast<double>(counts.tp) / denom;
}

double micro_f1(std::span<const PredictionRecord> predictions, TaskKind task) {
  if (task != TaskKind::binary_attribute) {
    throw InvalidInput("micro F1 is only defined for binary-attribute tasks");
  }
  ConfusionCounts counts;
  for (const PredictionRecord& rec : predictions) {
    const bool pred_pos = rec.predicted == kAttributeUsed;
    const bool gold_pos = rec.observed == kAttributeUsed;
    if (pred_pos && gold_pos) {
      ++counts.tp;
    } else if (pred_pos) {
      ++counts.fp;
    } else if (gold_pos) {
      ++counts.fn;
    } else {
      ++counts.tn;
    }
  }
  return micro_f1(counts);
}

EvalReport evaluate_sequential(const Dataset& test, const ModelParams& m,
                               int workers) {
  return run_protocol(test, m, /*adapt=*/true, workers);
}

EvalReport evaluate_static(const Dataset& test, const ModelParams& m,
                           int workers) {
  return run_protocol(test, m, /*adapt=*/false, workers);
}

EvalReport merge_reports(std::span<const EvalReport> reports) {
  if (reports.empty()) {
    throw InvalidInput("cannot merge zero reports");
  }
  EvalReport merged;
  merged.task = reports.front().task;
  for (const EvalReport& r : reports) {
    if (r.task != merged.task) {
      throw InvalidInput("cannot merge reports of different task kinds");
    }
    merged.total_observations += r.total_observations;
    merged.correct += r.correct;
    merged.confusion.tp += r.confusion.tp;
    merged.confusion.fp += r.confusion.fp;
    merged.confusion.fn += r.confusion.fn;
    merged.confusion.tn += r.confusion.tn;
    if (merged.positions.size() < r.positions.size()) {
      merged.positions.resize(r.positions.size());
    }
    for (std::size_t i = 0; i < r.positions.size(); ++i) {
      PositionStats& dst = merged.positions[i];
      const PositionStats& src = r.positions[i];
      dst.n += src.n;
      dst.correct += src.correct;
      dst.entropy_sum += src.entropy_sum;
      dst.confusion.tp += src.confusion.tp;
      dst.confusion.fp += src.confusion.fp;
      dst.confusion.fn += src.confusion.fn;
      dst.confusion.tn += src.confusion.tn;
    }
    merged.predictions.insert(merged.predictions.end(), r.predictions.begin(),
                              r.predictions.end());
  }
  return merged;
}

void write_report_json(const EvalReport& report, const std::string& mode,
                       const std::filesystem::path& path) {
  nlohmann::json j;
  j["mode"] = mode;
  j["task"] = std::string(task_name(report.task));
  j["total_observations"] = report.total_observations;
  j["correct"] = report.correct;
  j["overall_accuracy"] = report.overall_accuracy();
  j["num_positions"] = report.positions.size();
  if (report.task == TaskKind::binary_attribute) {
    j["micro_f1"] = *report.overall_micro_f1();
    j["confusion"] = {{"tp", report.confusion.tp},
                      {"fp", report.confusion.fp},
                      {"fn", report.confusion.fn},
                      {"tn", report.confusion.tn}};
    j["f1_averaging"] =
        "micro: confusion counts pooled across folds, users and positions; "
        "positive class is candidate id 1 (attribute used)";
  }
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open report file for writing: " + path.string());
  }
  out << j.dump(2) << "\n";
}

void write_curve_csv(const EvalReport& report,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open curve file for writing: " + path.string());
  }
  out << "position,accuracy,f1,mean_entropy,n\n";
  for (std::size_t i = 0; i < report.positions.size(); ++i) {
    const PositionStats& pos = report.positions[i];
    out << (i + 1) << "," << format_double(pos.accuracy()) << ",";
    if (report.task == TaskKind::binary_attribute) {
      out << format_double(micro_f1(pos.confusion));
    }
    out << "," << format_double(pos.mean_entropy()) << "," << pos.n << "\n";
  }
}

void write_predictions_csv(const EvalReport& report,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw LoadError("cannot open predictions file for writing: " +
                    path.string());
  }
  out << "user,position,predicted,observed,correct,entropy_before\n";
  for (const PredictionRecord& rec : report.predictions) {
    out << rec.user << "," << rec.position << "," << rec.predicted << ","
        << rec.observed << "," << (rec.predicted == rec.observed ? 1 : 0)
        << "," << format_double(rec.entropy_before, "%.12g") << "\n";
  }
}

}  // namespace groupmix
