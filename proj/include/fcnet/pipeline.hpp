#pragma once

#include "fcnet/connectivity.hpp"
#include "fcnet/nested_cv.hpp"
#include "fcnet/signal.hpp"
#include "fcnet/synthgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fcnet::pipeline {

inline constexpr const char* kVersion = "1.0.0";

enum class InputPathway { pearson, spearman, granger, raw };

std::string to_string(InputPathway p);

struct InputSource {
  std::string preset;    // synthetic preset name, or empty
  std::string manifest;  // cohort manifest path, or empty
  int n_subjects_per_class = 24;
  std::optional<double> jitter;
  std::optional<std::uint64_t> seed;  // defaults to the CV seed

  bool operator==(const InputSource&) const = default;
};

struct RunConfig {
  InputSource input;
  bool zscore = true;
  std::optional<std::size_t> window_length;
  std::optional<std::size_t> window_stride;
  InputPathway connectivity = InputPathway::pearson;
  double alpha = 0.05;
  LagPolicy lag_policy = BicLag{8};
  int raw_width = 128;
  eval::ModelFamily model = eval::ModelFamily::tuned;
  eval::TunerKind tuner = eval::TunerKind::random;
  eval::TunerBudget budget;
  HyperParams fixed_hp;
  int batch_size = 8;
  std::optional<int> early_stop_patience = 10;
  int k = 10;
  eval::InnerPolicy inner;
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  std::size_t jobs = 1;

  /// Throws UsageError describing the first violated constraint.
  void validate() const;
  std::uint64_t cohort_seed() const { return input.seed.value_or(seed); }
};

/// Every field, defaults filled in.
nlohmann::json to_json(const RunConfig& cfg);
/// Strict parse: unknown keys and wrong types are UsageErrors. Accepts a
/// run manifest too, in which case its embedded config is used.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Hash over the fields that influence results (not output_dir or jobs).
std::string config_hash(const RunConfig& cfg);

Cohort load_input(const RunConfig& cfg);

/// Connectivity matrix or strided raw series of each recording as a
/// one-channel image, after optional z-scoring and windowing.
std::vector<eval::Sample> prepare_samples(const Cohort& cohort, const RunConfig& cfg);

/// Keeps `width` columns of a [channels x samples] matrix, every
/// floor(samples / width)-th sample starting at 0.
nn::Tensor raw_image(const Recording& rec, int width);

struct StageTimes {
  double load = 0.0;
  double features = 0.0;
  double evaluate = 0.0;
};

struct Experiment {
  eval::EvalReport report;
  StageTimes times;
  std::size_t n_recordings = 0;
};

Experiment run_experiment(const RunConfig& cfg, const Cohort* cohort = nullptr);

/// Fresh `<parent>/run-YYYYmmdd-HHMMSS[-n]` directory.
std::filesystem::path fresh_run_dir(const std::filesystem::path& parent,
                                    const std::string& prefix = "run");

struct RunOutputs {
  std::filesystem::path dir;
  eval::EvalReport report;
  std::string digest;
};

/// Full `run`: evaluates and writes report.json, roc.csv, roc.svg,
/// trials_fold<k>.csv, config.json and manifest.json.
RunOutputs cmd_run(const RunConfig& cfg, std::ostream& log);

struct Comparison {
  eval::EvalReport a;
  eval::EvalReport b;
  double delta_auc = 0.0;  // mean test AUC of a minus b
  std::string table;
};

Comparison cmd_compare(const RunConfig& a, const RunConfig& b, bool allow_seed_mismatch,
                       std::ostream& log, const std::filesystem::path* out_dir = nullptr);

/// Writes `<subject>.csv` (+ `.json` sidecar) per recording under a fresh
/// directory; returns it. Failing subjects are listed and rethrown as one
/// DataError after the rest are written.
std::filesystem::path cmd_connectivity(const RunConfig& cfg, std::ostream& log);

std::filesystem::path cmd_synth(const std::string& preset, std::uint64_t seed,
                                int n_subjects_per_class,
                                const std::filesystem::path& out_dir, std::size_t jobs,
                                std::ostream& log);

}  // namespace fcnet::pipeline
