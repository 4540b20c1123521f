// groupmix command line: synthesize / train / eval / xval / inspect.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "groupmix/data.hpp"
#include "groupmix/errors.hpp"
#include "groupmix/eval.hpp"
#include "groupmix/kernels.hpp"
#include "groupmix/mixture.hpp"
#include "groupmix/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

using namespace groupmix;

struct TrainFlags {
  Hyperparams hp;
  int workers = 1;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags, bool with_groups) {
  if (with_groups) {
    cmd->add_option("--groups", flags.hp.num_groups,
                    "Number of latent user groups K")
        ->capture_default_str();
  }
  cmd->add_option("--sigma-pi", flags.hp.sigma_pi,
                  "Prior variance of the group-weight vector")
      ->capture_default_str();
  cmd->add_option("--sigma-rho", flags.hp.sigma_rho,
                  "Prior variance of each per-group weight vector")
      ->capture_default_str();
  cmd->add_option("--em-max-iters", flags.hp.em_max_iters,
                  "Maximum EM iterations")
      ->capture_default_str();
  cmd->add_option("--em-tol", flags.hp.em_tol,
                  "Relative objective-change convergence threshold")
      ->capture_default_str();
  cmd->add_option("--inner-steps", flags.hp.inner_steps,
                  "Quasi-Newton steps per EM iteration")
      ->capture_default_str();
  cmd->add_option("--restarts", flags.hp.restarts, "Random restarts")
      ->capture_default_str();
  cmd->add_option("--workers", flags.workers,
                  "Worker threads for per-user loops (1 = serial)")
      ->capture_default_str();
}

nlohmann::json hyperparams_json(const Hyperparams& hp) {
  return {{"num_groups", hp.num_groups},   {"sigma_pi", hp.sigma_pi},
          {"sigma_rho", hp.sigma_rho},     {"em_max_iters", hp.em_max_iters},
          {"em_tol", hp.em_tol},           {"inner_steps", hp.inner_steps},
          {"restarts", hp.restarts},       {"seed", hp.seed}};
}

void print_restarts(const TrainResult& result) {
  for (const RestartSummary& r : result.restarts) {
    std::printf("restart seed=%llu objective=%.6f iterations=%zu %s\n",
                static_cast<unsigned long long>(r.seed), r.final_objective,
                r.iterations, r.converged ? "converged" : "hit-max-iters");
  }
  std::printf("final objective %.6f (seed %llu)\n", result.final_objective,
              static_cast<unsigned long long>(result.winning_seed));
}

ModelFile make_model_file(const TrainResult& result, const Dataset& d,
                          const Hyperparams& hp) {
  ModelFile model;
  model.params = result.params;
  model.feature_names = d.feature_names;
  model.metadata = {{"hyperparams", hyperparams_json(hp)},
                    {"winning_seed", result.winning_seed},
                    {"final_objective", result.final_objective},
                    {"em_iterations", result.trace.empty()
                                          ? 0
                                          : result.trace.back().iteration},
                    {"train_users", d.num_users()},
                    {"train_observations", d.num_observations()},
                    {"task", std::string(task_name(d.task))}};
  return model;
}

void check_user_disjoint(const Dataset& train, const Dataset& test) {
  std::unordered_set<std::string> test_users;
  for (const UserRecord& u : test.users) {
    test_users.insert(u.id);
  }
  for (const UserRecord& u : train.users) {
    if (test_users.count(u.id)) {
      std::fprintf(stderr,
                   "fold invariant violated: user '%s' appears in both train "
                   "and test\n",
                   u.id.c_str());
      std::abort();
    }
  }
}

void write_eval_outputs(const EvalReport& report, const std::string& mode,
                        const fs::path& dir, const std::string& prefix,
                        bool predictions) {
  write_report_json(report, mode, dir / (prefix + mode + "_summary.json"));
  write_curve_csv(report, dir / (prefix + mode + "_curve.csv"));
  if (predictions) {
    write_predictions_csv(report,
                          dir / (prefix + mode + "_predictions.csv"));
  }
}

int run_synthesize(const SyntheticConfig& cfg, const std::string& out) {
  const SyntheticData data = generate_synthetic(cfg);
  save_dataset(data.dataset, out);
  save_truth(data, out + ".truth");
  std::printf("wrote %zu observations from %zu users to %s\n",
              data.dataset.num_observations(), data.dataset.num_users(),
              out.c_str());
  return 0;
}

int run_train(const std::string& dataset_path, const std::string& model_path,
              std::string trace_path, TrainFlags& flags) {
  const Dataset d = load_dataset(dataset_path);
  flags.hp.validate();
  const TrainResult result = em_fit(d, flags.hp, flags.workers);
  print_restarts(result);

  save_model(make_model_file(result, d, flags.hp), model_path);
  if (trace_path.empty()) {
    trace_path = model_path + ".trace.csv";
  }
  write_trace_csv(result.trace, trace_path);
  std::printf("model written to %s\n", model_path.c_str());
  return 0;
}

int run_eval(const std::string& dataset_path, const std::string& model_path,
             const std::string& out_dir, bool predictions, int workers) {
  const Dataset d = load_dataset(dataset_path);
  const ModelFile model = load_model(model_path);
  fs::create_directories(out_dir);

  const EvalReport seq = evaluate_sequential(d, model.params, workers);
  const EvalReport stat = evaluate_static(d, model.params, workers);
  write_eval_outputs(seq, "sequential", out_dir, "", predictions);
  write_eval_outputs(stat, "static", out_dir, "", predictions);

  std::printf("sequential accuracy %.4f\n", seq.overall_accuracy());
  if (auto f1 = seq.overall_micro_f1()) {
    std::printf("sequential micro-F1 %.4f\n", *f1);
  }
  std::printf("static accuracy %.4f\n", stat.overall_accuracy());
  if (auto f1 = stat.overall_micro_f1()) {
    std::printf("static micro-F1 %.4f\n", *f1);
  }
  return 0;
}

int run_xval(const std::string& dataset_path, const std::string& out_dir,
             std::size_t folds, std::vector<std::size_t> groups_list,
             TrainFlags& flags, std::uint64_t seed, bool predictions) {
  const Dataset d = load_dataset(dataset_path);
  fs::create_directories(out_dir);
  const std::vector<FoldPair> pairs = split_user_folds(d, folds, seed);
  for (const FoldPair& pair : pairs) {
    check_user_disjoint(pair.train, pair.test);
  }

  nlohmann::json summary;
  summary["folds"] = folds;
  summary["seed"] = seed;
  summary["groups"] = nlohmann::json::array();

  for (const std::size_t k : groups_list) {
    Hyperparams hp = flags.hp;
    hp.num_groups = k;

    std::vector<EvalReport> seq_reports;
    std::vector<EvalReport> static_reports;
    for (std::size_t f = 0; f < pairs.size(); ++f) {
      hp.seed = seed + 1000003 * (f + 1);
      const TrainResult result = em_fit(pairs[f].train, hp, flags.workers);
      const std::string stem =
          "k" + std::to_string(k) + "_fold" + std::to_string(f);
      save_model(make_model_file(result, pairs[f].train, hp),
                 fs::path(out_dir) / (stem + "_model.json"));
      write_trace_csv(result.trace,
                      fs::path(out_dir) / (stem + "_trace.csv"));
      seq_reports.push_back(
          evaluate_sequential(pairs[f].test, result.params, flags.workers));
      static_reports.push_back(
          evaluate_static(pairs[f].test, result.params, flags.workers));
    }

    const EvalReport seq = merge_reports(seq_reports);
    const EvalReport stat = merge_reports(static_reports);
    const std::string prefix = "k" + std::to_string(k) + "_";
    write_eval_outputs(seq, "sequential", out_dir, prefix, predictions);
    write_eval_outputs(stat, "static", out_dir, prefix, predictions);

    nlohmann::json entry;
    entry["k"] = k;
    entry["sequential_accuracy"] = seq.overall_accuracy();
    entry["static_accuracy"] = stat.overall_accuracy();
    if (auto f1 = seq.overall_micro_f1()) {
      entry["sequential_micro_f1"] = *f1;
      entry["static_micro_f1"] = *stat.overall_micro_f1();
    }
    summary["groups"].push_back(entry);

    std::printf("K=%zu sequential accuracy %.4f, static accuracy %.4f\n", k,
                seq.overall_accuracy(), stat.overall_accuracy());
  }

  std::ofstream out(fs::path(out_dir) / "xval_summary.json");
  out << summary.dump(2) << "\n";
  return 0;
}

int run_inspect(const std::string& model_path,
                const std::string& dataset_path) {
  if (!model_path.empty()) {
    const ModelFile model = load_model(model_path);
    const std::vector<double> prior = group_prior(model.params.pi);
    std::printf("model %s\n", model_path.c_str());
    std::printf("  groups: %zu, feature_dim: %zu\n",
                model.params.num_groups(), model.params.feature_dim());
    for (std::size_t g = 0; g < model.params.num_groups(); ++g) {
      double norm = 0.0;
      for (double w : model.params.group_weights[g]) {
        norm += w * w;
      }
      std::printf("  group %zu: prior %.4f, |rho| %.4f\n", g, prior[g],
                  std::sqrt(norm));
    }
    std::printf("  features:");
    for (const std::string& name : model.feature_names) {
      std::printf(" %s", name.c_str());
    }
    std::printf("\n");
    if (!model.metadata.is_null()) {
      std::printf("  metadata: %s\n", model.metadata.dump().c_str());
    }
  }
  if (!dataset_path.empty()) {
    const Dataset d = load_dataset(dataset_path);
    std::printf("dataset %s\n", dataset_path.c_str());
    std::printf("  task: %s, users: %zu, observations: %zu, feature_dim: %zu\n",
                std::string(task_name(d.task)).c_str(), d.num_users(),
                d.num_observations(), d.feature_dim);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-linear user behavior models with latent groups: EM "
               "training plus online Bayesian adaptation to unseen users"};
  app.require_subcommand(1);

  // synthesize
  SyntheticConfig synth_cfg;
  std::string synth_out;
  CLI::App* synthesize =
      app.add_subcommand("synthesize", "Generate the synthetic salience dataset");
  synthesize->add_option("--out", synth_out, "Output dataset path (JSONL)")
      ->required();
  synthesize->add_option("--num-users", synth_cfg.num_users)
      ->capture_default_str();
  synthesize->add_option("--obs-per-user", synth_cfg.obs_per_user)
      ->capture_default_str();
  synthesize
      ->add_option("--candidates-per-scene", synth_cfg.candidates_per_scene)
      ->capture_default_str();
  synthesize->add_option("--fraction-max-group", synth_cfg.fraction_max_group)
      ->capture_default_str();
  synthesize->add_option("--noise-rate", synth_cfg.noise_rate)
      ->capture_default_str();
  synthesize
      ->add_option("--distractor-features", synth_cfg.distractor_features)
      ->capture_default_str();
  synthesize->add_option("--seed", synth_cfg.seed)->capture_default_str();

  // train
  std::string train_dataset, train_model, train_trace;
  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "Fit a group model with EM");
  train->add_option("--dataset", train_dataset, "Training dataset (JSONL)")
      ->required();
  train->add_option("--model", train_model, "Output model path (JSON)")
      ->required();
  train->add_option("--trace", train_trace,
                    "Trace CSV path (default: <model>.trace.csv)");
  add_train_flags(train, train_flags, /*with_groups=*/true);
  train->add_option("--seed", train_flags.hp.seed)->capture_default_str();

  // eval
  std::string eval_dataset, eval_model, eval_out;
  bool eval_predictions = false;
  int eval_workers = 1;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a model on a test dataset");
  eval_cmd->add_option("--dataset", eval_dataset, "Test dataset (JSONL)")
      ->required();
  eval_cmd->add_option("--model", eval_model, "Model path (JSON)")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_flag("--predictions", eval_predictions,
                     "Also write per-prediction log CSVs");
  eval_cmd->add_option("--workers", eval_workers)->capture_default_str();

  // xval
  std::string xval_dataset, xval_out;
  std::size_t xval_folds = 0;
  std::vector<std::size_t> groups_list;
  std::uint64_t xval_seed = 0;
  bool xval_predictions = false;
  TrainFlags xval_flags;
  CLI::App* xval = app.add_subcommand(
      "xval", "User-disjoint cross-validation: train and evaluate per fold");
  xval->add_option("--dataset", xval_dataset, "Dataset (JSONL)")->required();
  xval->add_option("--out", xval_out, "Output directory")->required();
  xval->add_option("--folds", xval_folds, "Number of user-disjoint folds")
      ->required();
  xval->add_option("--groups-list", groups_list,
                   "Comma-separated K values to sweep")
      ->delimiter(',');
  add_train_flags(xval, xval_flags, /*with_groups=*/true);
  xval->add_option("--seed", xval_seed)->capture_default_str();
  xval->add_flag("--predictions", xval_predictions,
                 "Also write per-prediction log CSVs");

  // inspect
  std::string inspect_model, inspect_dataset;
  CLI::App* inspect =
      app.add_subcommand("inspect", "Print a model or dataset summary");
  inspect->add_option("--model", inspect_model, "Model path (JSON)");
  inspect->add_option("--dataset", inspect_dataset, "Dataset path (JSONL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synthesize) {
      return run_synthesize(synth_cfg, synth_out);
    }
    if (*train) {
      return run_train(train_dataset, train_model, train_trace, train_flags);
    }
    if (*eval_cmd) {
      return run_eval(eval_dataset, eval_model, eval_out, eval_predictions,
                      eval_workers);
    }
    if (*xval) {
      if (groups_list.empty()) {
        groups_list.push_back(xval_flags.hp.num_groups);
      }
      return run_xval(xval_dataset, xval_out, xval_folds, groups_list,
                      xval_flags, xval_seed, xval_predictions);
    }
    if (*inspect) {
      if (inspect_model.empty() && inspect_dataset.empty()) {
        std::fprintf(stderr, "inspect needs --model and/or --dataset\n");
        return 1;
      }
      return run_inspect(inspect_model, inspect_dataset);
    }
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
