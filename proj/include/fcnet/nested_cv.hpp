#pragma once

#include "fcnet/evalmetrics.hpp"
#include "fcnet/nn.hpp"
#include "fcnet/tuner.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fcnet::eval {

enum class ModelFamily { tuned, untuned };
enum class TunerKind { random, hyperband, bayes, none };

std::string to_string(ModelFamily f);
std::string to_string(TunerKind t);
ModelFamily model_family_from_string(const std::string& s);
TunerKind tuner_kind_from_string(const std::string& s);

/// One network input with the subject it came from.
struct Sample {
  std::string subject_id;
  int label = 0;
  nn::Tensor input;  // [H, W, 1]
};

struct TunerBudget {
  int random_trials = 20;
  int max_epochs = 30;  // full resource for random search, BO and retraining
  int hyperband_max_resource = 81;
  int hyperband_eta = 3;
  int bayes_init = 5;
  int bayes_iter = 15;
};

struct CvConfig {
  int k = 10;
  InnerPolicy inner;
  std::uint64_t seed = 0;
  ModelFamily model = ModelFamily::tuned;
  TunerKind tuner = TunerKind::random;
  TunerBudget budget;
  int batch_size = 8;
  std::optional<int> early_stop_patience = 10;
  /// Used when tuner is none (tuned family) and as the untuned learning rate.
  HyperParams fixed_hp;
  std::size_t jobs = 1;
};

struct FoldResult {
  int fold = 0;
  std::vector<std::string> test_subjects;
  std::vector<std::string> tuning_subjects;
  ConfusionCounts confusion;
  Rates rates;
  RocResult roc;
  MicroMacro micro_macro;
  HyperParams chosen;
  std::uint64_t seed = 0;
  std::vector<double> scores;  // class-1 probability per test sample
  std::vector<int> labels;
  std::vector<tuner::Trial> trials;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over folds
};

inline constexpr int kReportSchemaVersion = 1;

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  std::vector<FoldResult> folds;
  std::map<std::string, Summary> aggregates;  // accuracy, precision, recall, auc, ...
  double pooled_micro_auc = 0.0;  // over all out-of-fold predictions
  double pooled_macro_auc = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;

  double mean_test_auc() const { return aggregates.at("auc").mean; }
};

/// Recomputes the aggregate block from the per-fold entries.
void aggregate(EvalReport& report);

/// Outer k folds split by subject. In each outer fold the tuner sees only
/// the outer-training subjects (scored by inner-split validation accuracy),
/// the winning configuration is retrained on all outer-training subjects and
/// scored on the held-out fold.
EvalReport nested_cv(const std::vector<Sample>& samples, const CvConfig& cfg);

/// Model for one configuration of the chosen family.
nn::ModelSpec build_spec(ModelFamily family, int input_h, int input_w,
                         const HyperParams& hp);

}  // namespace fcnet::eval
