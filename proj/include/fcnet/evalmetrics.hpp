#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fcnet::eval {

/// Class 1 (patient) is the positive class.
struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

/// A metric whose denominator was zero is reported as 0 with its flag set.
struct Rates {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), accuracy = (tp+tn)/total.
Rates precision_recall_accuracy(const ConfusionCounts& c);

struct RocPoint {
  double threshold = 0.0;  // +inf for the origin
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

/// Sweeps every distinct score as a threshold (predict positive when
/// score >= threshold). Tied scores move along a diagonal segment, so the
/// trapezoidal area equals the Mann-Whitney statistic
/// P(s+ > s-) + P(s+ == s-)/2 exactly.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

struct MicroMacro {
  double micro_auc = 0.0;
  double macro_auc = 0.0;
  std::array<double, 2> per_class_auc{};
};

/// scores_per_class[k][i] is example i's one-vs-rest score for class k.
/// Macro averages the per-class AUCs; micro pools every (score, indicator)
/// pair of both one-vs-rest problems into one curve.
MicroMacro micro_macro_auc(const std::array<std::vector<double>, 2>& scores_per_class,
                           std::span<const int> labels);

struct InnerPolicy {
  enum class Kind { folds, holdout };
  Kind kind = Kind::folds;
  int folds = 3;
  double holdout_fraction = 0.25;

  std::string describe() const;
};

/// Subject-level stratified assignment to k folds.
struct FoldPlan {
  int k = 0;
  std::vector<std::string> subjects;        // input order
  std::vector<int> labels;                  // per subject
  std::unordered_map<std::string, int> outer_assignments;
  InnerPolicy inner_policy;
  std::uint64_t seed = 0;

  std::vector<std::string> fold_subjects(int fold) const;
};

/// Shuffles each class under `seed` and deals subjects round-robin so fold
/// sizes, and per-class counts per fold, differ by at most one.
FoldPlan stratified_folds(std::span<const std::string> subject_ids,
                          std::span<const int> subject_labels, int k, std::uint64_t seed);

}  // namespace fcnet::eval
