#pragma once

#include "fcnet/signal.hpp"
#include "fcnet/util.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fcnet::synth {

/// Lag-1 VAR: x[t] = self_coeff * x[t-1] + adjacency * x[t-1] + noise.
/// adjacency(i, j) is the weight of channel j driving channel i.
struct VarNetworkSpec {
  int n_channels = 0;
  Eigen::MatrixXd adjacency;
  double self_coeff = 0.5;
  double noise_sd = 1.0;
  int n_samples = 1024;
  int burn_in = 200;
  std::vector<std::string> channel_labels;  // defaults to ch0..chN-1

  /// Spectral radius of self_coeff * I + adjacency.
  double spectral_radius() const;

  /// Throws UsageError on shape problems, a nonzero adjacency diagonal or a
  /// non-stationary coefficient matrix.
  void validate() const;
};

struct CohortSpec {
  VarNetworkSpec class_a;  // class 0
  VarNetworkSpec class_b;  // class 1
  int n_subjects_per_class = 24;
  std::uint64_t seed = 0;
  double inter_subject_jitter = 0.0;
  std::array<std::string, 2> class_names{"control", "patient"};
};

Recording simulate_var(const VarNetworkSpec& spec, Rng& rng);

struct SyntheticCohort {
  Cohort cohort;
  std::vector<Eigen::MatrixXd> subject_adjacency;  // aligned with cohort.recordings
};

/// Subjects are generated from seeds derived from (seed, class, index), so
/// the result does not depend on generation order.
SyntheticCohort generate_cohort(const CohortSpec& spec, std::size_t jobs = 1);

using Edge = std::pair<int, int>;  // (target, driver)

/// Edges whose nonzero/zero status differs between the two classes.
std::set<Edge> ground_truth_delta(const CohortSpec& spec);

/// 19 channels x 1024 samples; class_b adds 6 coupling edges to a shared
/// base network.
CohortSpec preset_ad_like(std::uint64_t seed = 0);
/// 16 channels x 7680 samples with the same construction.
CohortSpec preset_sz_like(std::uint64_t seed = 0);
/// Identical class networks (no signal).
CohortSpec preset_null(std::uint64_t seed = 0);

CohortSpec preset(const std::string& name, std::uint64_t seed);

/// Writes one CSV per subject, `manifest.json`, and `ground_truth.json`
/// (per-subject adjacency plus class delta) into `dir`.
void write_cohort(const SyntheticCohort& data, const CohortSpec& spec,
                  const std::filesystem::path& dir);

}  // namespace fcnet::synth
