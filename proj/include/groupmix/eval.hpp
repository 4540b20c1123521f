#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupmix/data.hpp"
#include "groupmix/mixture.hpp"

namespace groupmix {

/// Pooled confusion counts for the positive class of a binary task
/// (candidate id 1, "attribute used").
struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long total() const noexcept { return tp + fp + fn + tn; }
};

struct PredictionRecord {
  std::string user;
  std::size_t position;  // 1-based observation index within the user
  int predicted;
  int observed;
  double entropy_before;  // posterior entropy when the prediction was made
};

/// Accumulators for one observation position (the i-th interaction with
/// each user).
struct PositionStats {
  std::size_t n = 0;
  std::size_t correct = 0;
  ConfusionCounts confusion;
  double entropy_sum = 0.0;

  double accuracy() const noexcept {
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
  }
  double mean_entropy() const noexcept {
    return n == 0 ? 0.0 : entropy_sum / static_cast<double>(n);
  }
};

struct EvalReport {
  TaskKind task = TaskKind::multiclass;
  std::size_t total_observations = 0;
  std::size_t correct = 0;
  ConfusionCounts confusion;                // binary tasks only
  std::vector<PositionStats> positions;     // index 0 = position 1
  std::vector<PredictionRecord> predictions;

  double overall_accuracy() const noexcept {
    return total_observations == 0
               ? 0.0
               : static_cast<double>(correct) /
                     static_cast<double>(total_observations);
  }
  /// Micro F1 over the positive class; empty for multiclass tasks.
  std::optional<double> overall_micro_f1() const;
};

/// F1 of pooled counts, 2TP / (2TP + FP + FN); 0 when precision and recall
/// are both undefined or zero.
double micro_f1(const ConfusionCounts& counts);

/// Pools a prediction log (positive class = id 1). Throws InvalidInput for
/// multiclass tasks.
double micro_f1(std::span<const PredictionRecord> predictions, TaskKind task);

/// The predict-then-observe protocol: for each user independently, start
/// from the prior posterior, predict each observation in order from the
/// adapted mixture, record correctness and the current posterior entropy,
/// and only then fold in the true observation. The current observation is
/// never visible to its own prediction.
EvalReport evaluate_sequential(const Dataset& test, const ModelParams& m,
                               int workers = 1);

/// Same metrics with the prior mixture used for every prediction (no
/// adaptation); doubles as the baseline for K = 1 models.
EvalReport evaluate_static(const Dataset& test, const ModelParams& m,
                           int workers = 1);

/// Pools reports from several folds: counts are summed, curves merged by
/// position (standard micro-averaging).
EvalReport merge_reports(std::span<const EvalReport> reports);

void write_report_json(const EvalReport& report, const std::string& mode,
                       const std::filesystem::path& path);
void write_curve_csv(const EvalReport& report,
                     const std::filesystem::path& path);
void write_predictions_csv(const EvalReport& report,
                           const std::filesystem::path& path);

}  // namespace groupmix
