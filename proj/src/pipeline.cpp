#include "fcnet/pipeline.hpp"

#include "fcnet/error.hpp"
#include "fcnet/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

namespace fcnet::pipeline {

using nlohmann::json;

std::string to_string(InputPathway p) {
  switch (p) {
    case InputPathway::pearson: return "pearson";
    case InputPathway::spearman: return "spearman";
    case InputPathway::granger: return "granger";
    case InputPathway::raw: return "raw";
  }
  return "unknown";
}

namespace {

InputPathway pathway_from_string(const std::string& s) {
  if (s == "pearson") return InputPathway::pearson;
  if (s == "spearman") return InputPathway::spearman;
  if (s == "granger") return InputPathway::granger;
  if (s == "raw") return InputPathway::raw;
  throw UsageError("unknown connectivity '" + s + "'");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw UsageError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
T field(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(where + "." + key + " has the wrong type");
  }
}

json lag_json(const LagPolicy& p) {
  if (const auto* f = std::get_if<FixedLag>(&p)) return {{"kind", "fixed"}, {"lag", f->lag}};
  return {{"kind", "bic"}, {"max_lag", std::get<BicLag>(p).max_lag}};
}

// Rethrows with a "[stage] " prefix, keeping the error category.
template <class Fn>
auto in_stage(const char* stage, Fn&& fn) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(tag + e.what());
  } catch (const NumericError& e) {
    throw NumericError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void RunConfig::validate() const {
  if (input.preset.empty() == input.manifest.empty()) {
    throw UsageError("input needs exactly one of 'preset' or 'manifest'");
  }
  if (input.n_subjects_per_class < 1) throw UsageError("n_subjects_per_class must be positive");
  if (window_length.has_value() != window_stride.has_value()) {
    throw UsageError("window needs both length and stride");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (const auto* f = std::get_if<FixedLag>(&lag_policy); f && f->lag < 1) {
    throw UsageError("fixed lag must be at least 1");
  }
  if (const auto* b = std::get_if<BicLag>(&lag_policy); b && b->max_lag < 1) {
    throw UsageError("max_lag must be at least 1");
  }
  if (raw_width < 4) throw UsageError("raw_width must be at least 4");
  if (model == eval::ModelFamily::untuned && tuner != eval::TunerKind::none) {
    throw UsageError("model 'untuned' requires tuner 'none'");
  }
  if (budget.random_trials < 1 || budget.max_epochs < 1 || budget.bayes_iter < 0 ||
      budget.bayes_init < 2) {
    throw UsageError("tuner budgets must be positive (bayes_init >= 2)");
  }
  if (budget.hyperband_eta < 2 || budget.hyperband_max_resource < budget.hyperband_eta) {
    throw UsageError("hyperband needs R >= eta >= 2");
  }
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  if (early_stop_patience && *early_stop_patience < 1) {
    throw UsageError("early_stop_patience must be positive");
  }
  if (k < 2) throw UsageError("cv.k must be at least 2");
  if (inner.kind == eval::InnerPolicy::Kind::folds && inner.folds < 2) {
    throw UsageError("inner folds must be at least 2");
  }
  if (inner.kind == eval::InnerPolicy::Kind::holdout &&
      !(inner.holdout_fraction > 0.0 && inner.holdout_fraction < 1.0)) {
    throw UsageError("inner holdout fraction must lie in (0, 1)");
  }
  if (jobs < 1) throw UsageError("jobs must be at least 1");
}

json to_json(const RunConfig& c) {
  json input;
  if (!c.input.preset.empty()) input["preset"] = c.input.preset;
  if (!c.input.manifest.empty()) input["manifest"] = c.input.manifest;
  input["n_subjects_per_class"] = c.input.n_subjects_per_class;
  input["jitter"] = c.input.jitter ? json(*c.input.jitter) : json(nullptr);
  input["seed"] = c.input.seed ? json(*c.input.seed) : json(nullptr);

  json pre{{"zscore", c.zscore}};
  pre["window"] = c.window_length
                      ? json{{"length", *c.window_length}, {"stride", *c.window_stride}}
                      : json(nullptr);

  json inner{{"kind", c.inner.kind == eval::InnerPolicy::Kind::folds ? "folds" : "holdout"},
             {"folds", c.inner.folds},
             {"holdout_fraction", c.inner.holdout_fraction}};
  return {
      {"input", input},
      {"preprocess", pre},
      {"connectivity",
       {{"method", to_string(c.connectivity)},
        {"alpha", c.alpha},
        {"lag_policy", lag_json(c.lag_policy)},
        {"raw_width", c.raw_width}}},
      {"model", eval::to_string(c.model)},
      {"tuner",
       {{"kind", eval::to_string(c.tuner)},
        {"random_trials", c.budget.random_trials},
        {"max_epochs", c.budget.max_epochs},
        {"hyperband_max_resource", c.budget.hyperband_max_resource},
        {"hyperband_eta", c.budget.hyperband_eta},
        {"bayes_init", c.budget.bayes_init},
        {"bayes_iter", c.budget.bayes_iter}}},
      {"fixed_hyperparameters", eval::to_json(c.fixed_hp)},
      {"training",
       {{"batch_size", c.batch_size},
        {"early_stop_patience",
         c.early_stop_patience ? json(*c.early_stop_patience) : json(nullptr)}}},
      {"cv", {{"k", c.k}, {"inner", inner}, {"seed", c.seed}}},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
  };
}

RunConfig config_from_json(const json& doc_in) {
  const json& doc = doc_in.contains("run_manifest") ? doc_in.at("config") : doc_in;
  check_keys(doc,
             {"input", "preprocess", "connectivity", "model", "tuner",
              "fixed_hyperparameters", "training", "cv", "output_dir", "jobs"},
             "config");
  RunConfig c;
  if (doc.contains("input")) {
    const auto& in = doc.at("input");
    check_keys(in, {"preset", "manifest", "n_subjects_per_class", "jitter", "seed"}, "input");
    c.input.preset = field<std::string>(in, "preset", "", "input");
    c.input.manifest = field<std::string>(in, "manifest", "", "input");
    c.input.n_subjects_per_class =
        field<int>(in, "n_subjects_per_class", c.input.n_subjects_per_class, "input");
    if (in.contains("jitter") && !in.at("jitter").is_null()) {
      c.input.jitter = field<double>(in, "jitter", 0.0, "input");
    }
    if (in.contains("seed") && !in.at("seed").is_null()) {
      c.input.seed = field<std::uint64_t>(in, "seed", 0, "input");
    }
  }
  if (doc.contains("preprocess")) {
    const auto& pre = doc.at("preprocess");
    check_keys(pre, {"zscore", "window"}, "preprocess");
    c.zscore = field<bool>(pre, "zscore", c.zscore, "preprocess");
    if (pre.contains("window") && !pre.at("window").is_null()) {
      const auto& w = pre.at("window");
      check_keys(w, {"length", "stride"}, "preprocess.window");
      c.window_length = field<std::size_t>(w, "length", 0, "preprocess.window");
      c.window_stride = field<std::size_t>(w, "stride", 0, "preprocess.window");
    }
  }
  if (doc.contains("connectivity")) {
    const auto& con = doc.at("connectivity");
    check_keys(con, {"method", "alpha", "lag_policy", "raw_width"}, "connectivity");
    c.connectivity = pathway_from_string(
        field<std::string>(con, "method", to_string(c.connectivity), "connectivity"));
    c.alpha = field<double>(con, "alpha", c.alpha, "connectivity");
    c.raw_width = field<int>(con, "raw_width", c.raw_width, "connectivity");
    if (con.contains("lag_policy")) {
      const auto& lp = con.at("lag_policy");
      check_keys(lp, {"kind", "lag", "max_lag"}, "connectivity.lag_policy");
      const auto kind = field<std::string>(lp, "kind", "bic", "connectivity.lag_policy");
      if (kind == "fixed") {
        c.lag_policy = FixedLag{field<int>(lp, "lag", 1, "connectivity.lag_policy")};
      } else if (kind == "bic") {
        c.lag_policy = BicLag{field<int>(lp, "max_lag", 8, "connectivity.lag_policy")};
      } else {
        throw UsageError("lag_policy.kind must be 'fixed' or 'bic'");
      }
    }
  }
  c.model = eval::model_family_from_string(
      field<std::string>(doc, "model", eval::to_string(c.model), "config"));
  if (doc.contains("tuner")) {
    const auto& t = doc.at("tuner");
    check_keys(t,
               {"kind", "random_trials", "max_epochs", "hyperband_max_resource",
                "hyperband_eta", "bayes_init", "bayes_iter"},
               "tuner");
    c.tuner = eval::tuner_kind_from_string(
        field<std::string>(t, "kind", eval::to_string(c.tuner), "tuner"));
    auto& b = c.budget;
    b.random_trials = field<int>(t, "random_trials", b.random_trials, "tuner");
    b.max_epochs = field<int>(t, "max_epochs", b.max_epochs, "tuner");
    b.hyperband_max_resource =
        field<int>(t, "hyperband_max_resource", b.hyperband_max_resource, "tuner");
    b.hyperband_eta = field<int>(t, "hyperband_eta", b.hyperband_eta, "tuner");
    b.bayes_init = field<int>(t, "bayes_init", b.bayes_init, "tuner");
    b.bayes_iter = field<int>(t, "bayes_iter", b.bayes_iter, "tuner");
  }
  if (doc.contains("fixed_hyperparameters")) {
    const auto& h = doc.at("fixed_hyperparameters");
    check_keys(h,
               {"dropout_a", "dropout_b", "dropout_c", "dense_units", "activation",
                "learning_rate"},
               "fixed_hyperparameters");
    try {
      c.fixed_hp = eval::hyperparams_from_json(h);
    } catch (const json::exception&) {
      throw UsageError("fixed_hyperparameters has a field of the wrong type");
    }
  }
  if (doc.contains("training")) {
    const auto& tr = doc.at("training");
    check_keys(tr, {"batch_size", "early_stop_patience"}, "training");
    c.batch_size = field<int>(tr, "batch_size", c.batch_size, "training");
    if (tr.contains("early_stop_patience")) {
      c.early_stop_patience =
          tr.at("early_stop_patience").is_null()
              ? std::nullopt
              : std::optional<int>(field<int>(tr, "early_stop_patience", 10, "training"));
    }
  }
  if (doc.contains("cv")) {
    const auto& cv = doc.at("cv");
    check_keys(cv, {"k", "inner", "seed"}, "cv");
    c.k = field<int>(cv, "k", c.k, "cv");
    c.seed = field<std::uint64_t>(cv, "seed", c.seed, "cv");
    if (cv.contains("inner")) {
      const auto& in = cv.at("inner");
      check_keys(in, {"kind", "folds", "holdout_fraction"}, "cv.inner");
      const auto kind = field<std::string>(in, "kind", "folds", "cv.inner");
      if (kind == "folds") {
        c.inner.kind = eval::InnerPolicy::Kind::folds;
      } else if (kind == "holdout") {
        c.inner.kind = eval::InnerPolicy::Kind::holdout;
      } else {
        throw UsageError("cv.inner.kind must be 'folds' or 'holdout'");
      }
      c.inner.folds = field<int>(in, "folds", c.inner.folds, "cv.inner");
      c.inner.holdout_fraction =
          field<double>(in, "holdout_fraction", c.inner.holdout_fraction, "cv.inner");
    }
  }
  c.output_dir = field<std::string>(doc, "output_dir", c.output_dir, "config");
  c.jobs = field<std::size_t>(doc, "jobs", c.jobs, "config");
  if (c.input.preset.empty() && c.input.manifest.empty()) c.input.preset = "ad_like";
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw UsageError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig cfg = config_from_json(doc);
  // Relative manifest paths are taken relative to the config file.
  if (!cfg.input.manifest.empty() && std::filesystem::path(cfg.input.manifest).is_relative() &&
      !doc.contains("run_manifest")) {
    cfg.input.manifest = (path.parent_path() / cfg.input.manifest).string();
  }
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("jobs");
  return hex64(fnv1a64(j.dump()));
}

Cohort load_input(const RunConfig& cfg) {
  if (!cfg.input.manifest.empty()) return load_cohort(cfg.input.manifest);
  auto spec = synth::preset(cfg.input.preset, cfg.cohort_seed());
  spec.n_subjects_per_class = cfg.input.n_subjects_per_class;
  if (cfg.input.jitter) spec.inter_subject_jitter = *cfg.input.jitter;
  return synth::generate_cohort(spec, cfg.jobs).cohort;
}

nn::Tensor raw_image(const Recording& rec, int width) {
  const auto w = static_cast<std::size_t>(width);
  if (rec.n_samples() < w) {
    throw DataError("recording '" + rec.subject_id + "' has " +
                    std::to_string(rec.n_samples()) + " samples, fewer than raw width " +
                    std::to_string(width));
  }
  const std::size_t stride = rec.n_samples() / w;
  nn::Tensor img({rec.n_channels(), w, 1});
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    for (std::size_t i = 0; i < w; ++i) {
      img[c * w + i] = rec.data(static_cast<Eigen::Index>(c),
                                static_cast<Eigen::Index>(i * stride));
    }
  }
  return img;
}

namespace {

ConnectivityMatrix connectivity_of(const Recording& rec, const RunConfig& cfg) {
  switch (cfg.connectivity) {
    case InputPathway::pearson: return pearson_matrix(rec);
    case InputPathway::spearman: return spearman_matrix(rec);
    case InputPathway::granger: return granger_matrix(rec, cfg.alpha, cfg.lag_policy);
    case InputPathway::raw: break;
  }
  throw UsageError("raw pathway has no connectivity matrix");
}

nn::Tensor matrix_image(const ConnectivityMatrix& m) {
  const auto n = static_cast<std::size_t>(m.values.rows());
  nn::Tensor img({n, n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      img[i * n + j] = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return img;
}

std::vector<Recording> preprocess(const Recording& rec, const RunConfig& cfg) {
  Recording base = cfg.zscore ? zscore(rec) : rec;
  if (!cfg.window_length) return {std::move(base)};
  return window(base, *cfg.window_length, *cfg.window_stride);
}

}  // namespace

std::vector<eval::Sample> prepare_samples(const Cohort& cohort, const RunConfig& cfg) {
  cohort.validate();
  std::vector<std::vector<eval::Sample>> per_recording(cohort.recordings.size());
  parallel_for(cohort.recordings.size(), cfg.jobs, [&](std::size_t r) {
    const auto& rec = cohort.recordings[r];
    for (const auto& piece : preprocess(rec, cfg)) {
      eval::Sample s;
      s.subject_id = piece.subject_id;
      s.label = *piece.label;
      s.input = cfg.connectivity == InputPathway::raw
                    ? raw_image(piece, cfg.raw_width)
                    : matrix_image(connectivity_of(piece, cfg));
      per_recording[r].push_back(std::move(s));
    }
  });
  std::vector<eval::Sample> samples;
  for (auto& group : per_recording) {
    for (auto& s : group) samples.push_back(std::move(s));
  }
  return samples;
}

Experiment run_experiment(const RunConfig& cfg, const Cohort* cohort) {
  cfg.validate();
  Experiment ex;
  auto t0 = std::chrono::steady_clock::now();
  Cohort loaded;
  if (!cohort) {
    loaded = in_stage("load", [&] { return load_input(cfg); });
    cohort = &loaded;
  }
  ex.times.load = seconds_since(t0);
  ex.n_recordings = cohort->recordings.size();

  t0 = std::chrono::steady_clock::now();
  const auto samples = in_stage("features", [&] { return prepare_samples(*cohort, cfg); });
  ex.times.features = seconds_since(t0);

  eval::CvConfig cv;
  cv.k = cfg.k;
  cv.inner = cfg.inner;
  cv.seed = cfg.seed;
  cv.model = cfg.model;
  cv.tuner = cfg.tuner;
  cv.budget = cfg.budget;
  cv.batch_size = cfg.batch_size;
  cv.early_stop_patience = cfg.early_stop_patience;
  cv.fixed_hp = cfg.fixed_hp;
  cv.jobs = cfg.jobs;

  t0 = std::chrono::steady_clock::now();
  ex.report = in_stage("evaluate", [&] { return eval::nested_cv(samples, cv); });
  ex.report.config_hash = config_hash(cfg);
  ex.times.evaluate = seconds_since(t0);
  return ex;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& parent,
                                    const std::string& prefix) {
  std::filesystem::create_directories(parent);
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  const std::string base = prefix + "-" + stamp;
  for (int n = 0;; ++n) {
    const auto dir = parent / (n == 0 ? base : base + "-" + std::to_string(n));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

RunOutputs cmd_run(const RunConfig& cfg, std::ostream& log) {
  const auto ex = run_experiment(cfg);
  RunOutputs out;
  out.dir = fresh_run_dir(cfg.output_dir);
  out.report = ex.report;
  out.digest = eval::report_digest(ex.report);

  std::vector<std::string> files;
  const auto track = [&](const std::string& name) {
    files.push_back(name);
    return out.dir / name;
  };
  eval::write_report(ex.report, track("report.json"));
  eval::write_roc_csv(ex.report, track("roc.csv"));
  eval::write_roc_svg(ex.report,
                      "ROC: " + to_string(cfg.connectivity) + ", " +
                          eval::to_string(cfg.model) + ", " + eval::to_string(cfg.tuner),
                      track("roc.svg"));
  for (const auto& f : ex.report.folds) {
    if (!f.trials.empty()) {
      tuner::write_trial_log(f.trials, track("trials_fold" + std::to_string(f.fold) + ".csv"));
    }
  }
  {
    std::ofstream c(track("config.json"));
    c << to_json(cfg).dump(2) << '\n';
  }
  json manifest;
  manifest["run_manifest"] = 1;
  manifest["software_version"] = kVersion;
  manifest["config"] = to_json(cfg);
  manifest["config_hash"] = ex.report.config_hash;
  manifest["seeds"] = {{"cv", cfg.seed}, {"cohort", cfg.cohort_seed()}};
  manifest["stage_wall_times"] = {{"load", ex.times.load},
                                  {"features", ex.times.features},
                                  {"evaluate", ex.times.evaluate}};
  manifest["report_digest"] = out.digest;
  manifest["mean_test_auc"] = ex.report.mean_test_auc();
  files.push_back("manifest.json");
  manifest["outputs"] = files;
  {
    std::ofstream m(out.dir / "manifest.json");
    m << manifest.dump(2) << '\n';
  }
  log << eval::format_report(ex.report);
  log << "report digest " << out.digest << "\nwrote " << out.dir.string() << '\n';
  return out;
}

Comparison cmd_compare(const RunConfig& a, const RunConfig& b, bool allow_seed_mismatch,
                       std::ostream& log, const std::filesystem::path* out_dir) {
  a.validate();
  b.validate();
  if (a.seed != b.seed && !allow_seed_mismatch) {
    throw UsageError("configs use different seeds (" + std::to_string(a.seed) + " vs " +
                     std::to_string(b.seed) + "); pass --allow-seed-mismatch to override");
  }
  const bool same_input = a.input.preset == b.input.preset &&
                          a.input.manifest == b.input.manifest &&
                          a.input.n_subjects_per_class == b.input.n_subjects_per_class &&
                          a.input.jitter == b.input.jitter && a.cohort_seed() == b.cohort_seed();
  if (!same_input) throw DataError("configs do not describe the same cohort");

  const Cohort cohort = load_input(a);
  Comparison cmp;
  cmp.a = run_experiment(a, &cohort).report;
  cmp.b = run_experiment(b, &cohort).report;
  cmp.delta_auc = cmp.a.mean_test_auc() - cmp.b.mean_test_auc();

  const auto label = [](const RunConfig& c) {
    return to_string(c.connectivity) + "/" + eval::to_string(c.model) + "/" +
           eval::to_string(c.tuner);
  };
  std::ostringstream t;
  t << std::fixed << std::setprecision(3);
  t << std::left << std::setw(12) << "metric" << std::setw(28) << label(a) << std::setw(28)
    << label(b) << "delta\n";
  for (const char* m : {"accuracy", "precision", "recall", "auc", "micro_auc", "macro_auc"}) {
    const double va = cmp.a.aggregates.at(m).mean, vb = cmp.b.aggregates.at(m).mean;
    t << std::setw(12) << m << std::setw(28) << va << std::setw(28) << vb << (va - vb)
      << '\n';
  }
  t << "delta(mean test AUC) = " << cmp.delta_auc << '\n';
  cmp.table = t.str();
  log << cmp.table;

  if (out_dir) {
    const auto dir = fresh_run_dir(*out_dir, "compare");
    eval::write_report(cmp.a, dir / "report_a.json");
    eval::write_report(cmp.b, dir / "report_b.json");
    json summary{{"config_a", to_json(a)},
                 {"config_b", to_json(b)},
                 {"mean_test_auc_a", cmp.a.mean_test_auc()},
                 {"mean_test_auc_b", cmp.b.mean_test_auc()},
                 {"delta_auc", cmp.delta_auc}};
    std::ofstream(dir / "compare.json") << summary.dump(2) << '\n';
    std::ofstream(dir / "compare.txt") << cmp.table;
    log << "wrote " << dir.string() << '\n';
  }
  return cmp;
}

std::filesystem::path cmd_connectivity(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.connectivity == InputPathway::raw) {
    throw UsageError("connectivity command needs pearson, spearman or granger");
  }
  const Cohort cohort = load_input(cfg);
  const auto dir = fresh_run_dir(cfg.output_dir, "connectivity");
  std::vector<std::string> failures(cohort.recordings.size());
  parallel_for(cohort.recordings.size(), cfg.jobs, [&](std::size_t r) {
    const auto& rec = cohort.recordings[r];
    try {
      const auto pieces = preprocess(rec, cfg);
      for (std::size_t w = 0; w < pieces.size(); ++w) {
        const auto m = connectivity_of(pieces[w], cfg);
        const std::string name =
            pieces.size() == 1 ? rec.subject_id : rec.subject_id + "_w" + std::to_string(w);
        write_connectivity(m, dir / (name + ".csv"));
      }
    } catch (const std::exception& e) {
      failures[r] = rec.subject_id + ": " + e.what();
    }
  });
  std::string failed;
  std::size_t n_failed = 0;
  for (const auto& f : failures) {
    if (!f.empty()) {
      failed += "\n  " + f;
      ++n_failed;
    }
  }
  const auto n = cohort.recordings.front().n_channels();
  log << to_string(cfg.connectivity) << ": " << cohort.recordings.size() - n_failed
      << " matrices (" << n << "x" << n << ") written to " << dir.string() << '\n';
  if (n_failed) {
    throw DataError(std::to_string(n_failed) + " subject(s) failed:" + failed);
  }
  return dir;
}

std::filesystem::path cmd_synth(const std::string& preset, std::uint64_t seed,
                                int n_subjects_per_class,
                                const std::filesystem::path& out_dir, std::size_t jobs,
                                std::ostream& log) {
  auto spec = synth::preset(preset, seed);
  spec.n_subjects_per_class = n_subjects_per_class;
  const auto data = synth::generate_cohort(spec, jobs);
  const auto dir = fresh_run_dir(out_dir, "synth-" + preset);
  synth::write_cohort(data, spec, dir);
  log << "preset " << preset << ": " << data.cohort.recordings.size() << " recordings ("
      << spec.class_a.n_channels << " channels x " << spec.class_a.n_samples
      << " samples) written to " << dir.string() << '\n';
  return dir;
}

}  // namespace fcnet::pipeline
