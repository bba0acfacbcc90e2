#include "fcnet/nested_cv.hpp"

#include "fcnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace fcnet::eval {

std::string to_string(ModelFamily f) { return f == ModelFamily::tuned ? "tuned" : "untuned"; }

std::string to_string(TunerKind t) {
  switch (t) {
    case TunerKind::random: return "random";
    case TunerKind::hyperband: return "hyperband";
    case TunerKind::bayes: return "bayes";
    case TunerKind::none: return "none";
  }
  return "unknown";
}

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "tuned") return ModelFamily::tuned;
  if (s == "untuned") return ModelFamily::untuned;
  throw UsageError("unknown model family '" + s + "'");
}

TunerKind tuner_kind_from_string(const std::string& s) {
  if (s == "random") return TunerKind::random;
  if (s == "hyperband") return TunerKind::hyperband;
  if (s == "bayes") return TunerKind::bayes;
  if (s == "none") return TunerKind::none;
  throw UsageError("unknown tuner '" + s + "'");
}

nn::ModelSpec build_spec(ModelFamily family, int input_h, int input_w,
                         const HyperParams& hp) {
  return family == ModelFamily::tuned ? nn::build_tuned_spec(input_h, input_w, hp)
                                      : nn::build_untuned_spec(input_h, input_w);
}

void aggregate(EvalReport& report) {
  report.aggregates.clear();
  const auto summarize = [&](const std::string& name, auto&& get) {
    const auto n = static_cast<double>(report.folds.size());
    double sum = 0.0;
    for (const auto& f : report.folds) sum += get(f);
    Summary s;
    s.mean = sum / n;
    if (report.folds.size() > 1) {
      double ss = 0.0;
      for (const auto& f : report.folds) ss += (get(f) - s.mean) * (get(f) - s.mean);
      s.std = std::sqrt(ss / (n - 1.0));
    }
    report.aggregates[name] = s;
  };
  if (report.folds.empty()) return;
  summarize("accuracy", [](const FoldResult& f) { return f.rates.accuracy; });
  summarize("precision", [](const FoldResult& f) { return f.rates.precision; });
  summarize("recall", [](const FoldResult& f) { return f.rates.recall; });
  summarize("auc", [](const FoldResult& f) { return f.roc.auc; });
  summarize("micro_auc", [](const FoldResult& f) { return f.micro_macro.micro_auc; });
  summarize("macro_auc", [](const FoldResult& f) { return f.micro_macro.macro_auc; });

  std::array<std::vector<double>, 2> pooled;
  std::vector<int> labels;
  for (const auto& f : report.folds) {
    for (std::size_t i = 0; i < f.scores.size(); ++i) {
      pooled[0].push_back(1.0 - f.scores[i]);
      pooled[1].push_back(f.scores[i]);
      labels.push_back(f.labels[i]);
    }
  }
  const auto mm = micro_macro_auc(pooled, labels);
  report.pooled_micro_auc = mm.micro_auc;
  report.pooled_macro_auc = mm.macro_auc;
}

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

nn::Dataset gather(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  nn::Dataset d;
  d.inputs.reserve(idx.size());
  d.labels.reserve(idx.size());
  for (const auto i : idx) {
    d.inputs.push_back(samples[i].input);
    d.labels.push_back(samples[i].label);
  }
  return d;
}

std::vector<Split> inner_splits(const std::vector<Sample>& samples,
                                const std::vector<std::size_t>& pool,
                                const InnerPolicy& policy, std::uint64_t seed) {
  std::vector<std::string> subjects;
  std::vector<int> labels;
  std::unordered_set<std::string> seen;
  for (const auto i : pool) {
    if (seen.insert(samples[i].subject_id).second) {
      subjects.push_back(samples[i].subject_id);
      labels.push_back(samples[i].label);
    }
  }
  int k = 0;
  if (policy.kind == InnerPolicy::Kind::folds) {
    k = policy.folds;
  } else {
    if (!(policy.holdout_fraction > 0.0 && policy.holdout_fraction < 1.0)) {
      throw UsageError("holdout fraction must lie in (0, 1)");
    }
    k = std::max(2, static_cast<int>(std::lround(1.0 / policy.holdout_fraction)));
  }
  const auto plan = stratified_folds(subjects, labels, k, seed);
  const int n_splits = policy.kind == InnerPolicy::Kind::folds ? k : 1;
  std::vector<Split> splits(static_cast<std::size_t>(n_splits));
  for (const auto i : pool) {
    const int f = plan.outer_assignments.at(samples[i].subject_id);
    for (int s = 0; s < n_splits; ++s) {
      (f == s ? splits[static_cast<std::size_t>(s)].val
              : splits[static_cast<std::size_t>(s)].train)
          .push_back(i);
    }
  }
  return splits;
}

}  // namespace

EvalReport nested_cv(const std::vector<Sample>& samples, const CvConfig& cfg) {
  if (samples.empty()) throw DataError("no samples to evaluate");
  if (cfg.model == ModelFamily::untuned && cfg.tuner != TunerKind::none) {
    throw UsageError("the untuned model family takes no tuner");
  }
  if (cfg.budget.max_epochs < 1 || cfg.budget.random_trials < 1 || cfg.batch_size < 1) {
    throw UsageError("budgets must be positive");
  }
  const auto& shape = samples.front().input.shape;
  if (shape.size() != 3 || shape[2] != 1) throw DataError("samples must be [H, W, 1]");

  std::vector<std::string> subjects;
  std::vector<int> subject_labels;
  std::unordered_map<std::string, int> label_of;
  for (const auto& s : samples) {
    if (s.input.shape != shape) throw DataError("samples differ in shape");
    const auto [it, fresh] = label_of.emplace(s.subject_id, s.label);
    if (fresh) {
      subjects.push_back(s.subject_id);
      subject_labels.push_back(s.label);
    } else if (it->second != s.label) {
      throw DataError("subject '" + s.subject_id + "' carries two labels");
    }
  }
  for (int c = 0; c < 2; ++c) {
    const auto count = std::count(subject_labels.begin(), subject_labels.end(), c);
    if (count < cfg.k) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(count) +
                      " subjects; every outer fold needs both classes (k = " +
                      std::to_string(cfg.k) + ")");
    }
  }

  const int in_h = static_cast<int>(shape[0]);
  const int in_w = static_cast<int>(shape[1]);
  const auto plan = stratified_folds(subjects, subject_labels, cfg.k,
                                     derive_seed(cfg.seed, 0x0a7e));
  const int full_resource = cfg.tuner == TunerKind::hyperband
                                ? cfg.budget.hyperband_max_resource
                                : cfg.budget.max_epochs;

  EvalReport report;
  report.seed = cfg.seed;
  report.folds.resize(static_cast<std::size_t>(cfg.k));

  parallel_for(static_cast<std::size_t>(cfg.k), cfg.jobs, [&](std::size_t fold_idx) {
    const int fold = static_cast<int>(fold_idx);
    try {
      FoldResult& out = report.folds[fold_idx];
      out.fold = fold;
      out.seed = derive_seed(cfg.seed, 0xf01d, fold_idx);

      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        (plan.outer_assignments.at(samples[i].subject_id) == fold ? test_idx : train_idx)
            .push_back(i);
      }
      out.test_subjects = plan.fold_subjects(fold);
      {
        std::unordered_set<std::string> seen;
        for (const auto i : train_idx) {
          if (seen.insert(samples[i].subject_id).second) {
            out.tuning_subjects.push_back(samples[i].subject_id);
          }
        }
      }

      const auto make_train_cfg = [&](const HyperParams& hp, int epochs,
                                      std::uint64_t seed) {
        nn::TrainConfig tc;
        tc.learning_rate = hp.learning_rate;
        tc.batch_size = cfg.batch_size;
        tc.max_epochs = epochs;
        tc.early_stop_patience = cfg.early_stop_patience;
        tc.seed = seed;
        return tc;
      };

      HyperParams chosen = cfg.fixed_hp;
      if (cfg.tuner != TunerKind::none) {
        const auto splits = inner_splits(samples, train_idx, cfg.inner,
                                         derive_seed(out.seed, 1));
        std::vector<nn::Dataset> inner_train, inner_val;
        for (const auto& s : splits) {
          inner_train.push_back(gather(samples, s.train));
          inner_val.push_back(gather(samples, s.val));
        }
        const tuner::Objective objective = [&](const HyperParams& hp, int resource,
                                               std::uint64_t seed) {
          const auto spec = build_spec(cfg.model, in_h, in_w, hp);
          double total = 0.0;
          for (std::size_t s = 0; s < splits.size(); ++s) {
            const auto result = nn::train(spec, inner_train[s], &inner_val[s],
                                          make_train_cfg(hp, resource, derive_seed(seed, s)));
            total += nn::accuracy(result.model, inner_val[s]);
          }
          return total / static_cast<double>(splits.size());
        };
        Rng rng(derive_seed(out.seed, 2));
        const auto space = tuner::SearchSpace::standard();
        tuner::SearchResult search;
        switch (cfg.tuner) {
          case TunerKind::random:
            search = tuner::random_search(objective, space, cfg.budget.random_trials,
                                          cfg.budget.max_epochs, rng);
            break;
          case TunerKind::hyperband:
            search = tuner::hyperband(objective, space, cfg.budget.hyperband_max_resource,
                                      cfg.budget.hyperband_eta, rng);
            break;
          case TunerKind::bayes:
            search = tuner::bayes_opt(objective, space, cfg.budget.bayes_init,
                                      cfg.budget.bayes_iter, cfg.budget.max_epochs, rng);
            break;
          case TunerKind::none:
            break;
        }
        chosen = search.best.hp;
        out.trials = std::move(search.log);
      }
      out.chosen = chosen;

      const auto spec = build_spec(cfg.model, in_h, in_w, chosen);
      const auto final_fit = nn::train(spec, gather(samples, train_idx), nullptr,
                                       make_train_cfg(chosen, full_resource,
                                                      derive_seed(out.seed, 3)));
      std::vector<int> predictions;
      std::array<std::vector<double>, 2> per_class;
      for (const auto i : test_idx) {
        const auto p = nn::predict_proba(final_fit.model, samples[i].input);
        out.scores.push_back(p[1]);
        out.labels.push_back(samples[i].label);
        predictions.push_back(p[1] >= 0.5 ? 1 : 0);
        per_class[0].push_back(p[0]);
        per_class[1].push_back(p[1]);
      }
      out.confusion = confusion(out.labels, predictions);
      out.rates = precision_recall_accuracy(out.confusion);
      out.roc = roc_auc(out.scores, out.labels);
      out.micro_macro = micro_macro_auc(per_class, out.labels);
    } catch (const NumericError& e) {
      throw NumericError("outer fold " + std::to_string(fold) + ": " + e.what());
    } catch (const UsageError& e) {
      throw UsageError("outer fold " + std::to_string(fold) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError("outer fold " + std::to_string(fold) + ": " + e.what());
    }
  });

  aggregate(report);
  return report;
}

}  // namespace fcnet::eval
