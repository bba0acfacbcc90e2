#include "fcnet/evalmetrics.hpp"

#include "fcnet/error.hpp"
#include "fcnet/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace fcnet::eval {

namespace {

void check_binary(std::span<const int> v, const char* what) {
  for (const int x : v) {
    if (x != 0 && x != 1) {
      throw DataError(std::string(what) + " must be 0 or 1, got " + std::to_string(x));
    }
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.empty()) throw DataError("confusion of an empty set");
  if (labels.size() != predictions.size()) {
    throw DataError("labels and predictions differ in length");
  }
  check_binary(labels, "labels");
  check_binary(predictions, "predictions");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      predictions[i] == 1 ? ++c.tp : ++c.fn;
    } else {
      predictions[i] == 1 ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

Rates precision_recall_accuracy(const ConfusionCounts& c) {
  Rates r;
  if (c.tp + c.fp > 0) {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    r.precision_undefined = true;
  }
  if (c.tp + c.fn > 0) {
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    r.recall_undefined = true;
  }
  if (c.total() > 0) {
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  }
  return r;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  check_binary(labels, "labels");
  for (const double s : scores) {
    if (std::isnan(s)) throw DataError("NaN score");
  }
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  const long n_neg = static_cast<long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("ROC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult result;
  result.curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Twice the trapezoid area in units of (1/n_neg) x (1/n_pos); integer exact.
  long long twice_area = 0;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == threshold) {
      labels[order[i]] == 1 ? ++dtp : ++dfp;
      ++i;
    }
    twice_area += static_cast<long long>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    result.curve.points.push_back({threshold, static_cast<double>(fp) / n_neg,
                                   static_cast<double>(tp) / n_pos});
  }
  result.auc = static_cast<double>(twice_area) /
               (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return result;
}

MicroMacro micro_macro_auc(const std::array<std::vector<double>, 2>& scores_per_class,
                           std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (scores_per_class[0].size() != n || scores_per_class[1].size() != n) {
    throw DataError("per-class scores and labels differ in length");
  }
  MicroMacro out;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_ind;
  pooled_scores.reserve(2 * n);
  pooled_ind.reserve(2 * n);
  for (int k = 0; k < 2; ++k) {
    std::vector<int> indicator(n);
    for (std::size_t i = 0; i < n; ++i) indicator[i] = labels[i] == k ? 1 : 0;
    out.per_class_auc[static_cast<std::size_t>(k)] =
        roc_auc(scores_per_class[static_cast<std::size_t>(k)], indicator).auc;
    pooled_scores.insert(pooled_scores.end(),
                         scores_per_class[static_cast<std::size_t>(k)].begin(),
                         scores_per_class[static_cast<std::size_t>(k)].end());
    pooled_ind.insert(pooled_ind.end(), indicator.begin(), indicator.end());
  }
  out.macro_auc = 0.5 * (out.per_class_auc[0] + out.per_class_auc[1]);
  out.micro_auc = roc_auc(pooled_scores, pooled_ind).auc;
  return out;
}

std::string InnerPolicy::describe() const {
  std::ostringstream out;
  if (kind == Kind::folds) {
    out << "folds(" << folds << ")";
  } else {
    out << "holdout(" << holdout_fraction << ")";
  }
  return out.str();
}

std::vector<std::string> FoldPlan::fold_subjects(int fold) const {
  std::vector<std::string> out;
  for (const auto& s : subjects) {
    if (outer_assignments.at(s) == fold) out.push_back(s);
  }
  return out;
}

FoldPlan stratified_folds(std::span<const std::string> subject_ids,
                          std::span<const int> subject_labels, int k, std::uint64_t seed) {
  if (subject_ids.size() != subject_labels.size()) {
    throw DataError("one label per subject required");
  }
  check_binary(subject_labels, "subject labels");
  if (k < 2) throw UsageError("need at least 2 folds");
  if (static_cast<std::size_t>(k) > subject_ids.size()) {
    throw DataError("k = " + std::to_string(k) + " exceeds " +
                    std::to_string(subject_ids.size()) + " subjects");
  }
  std::unordered_set<std::string> seen;
  for (const auto& s : subject_ids) {
    if (!seen.insert(s).second) throw DataError("duplicate subject '" + s + "'");
  }

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    by_class[static_cast<std::size_t>(subject_labels[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw DataError("class " + std::to_string(c) + " has no subjects");
    }
  }

  Rng rng(seed);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.subjects.assign(subject_ids.begin(), subject_ids.end());
  plan.labels.assign(subject_labels.begin(), subject_labels.end());
  std::size_t position = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (const auto idx : members) {
      plan.outer_assignments[subject_ids[idx]] = static_cast<int>(position % k);
      ++position;
    }
  }
  return plan;
}

}  // namespace fcnet::eval
