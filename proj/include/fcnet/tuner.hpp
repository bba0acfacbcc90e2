#pragma once

#include "fcnet/hyperparams.hpp"
#include "fcnet/util.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fcnet::tuner {

/// Domain of the tuned network's hyperparameters.
struct SearchSpace {
  std::vector<double> dropout_a;
  std::vector<double> dropout_b;
  std::vector<double> dropout_c;
  std::vector<int> dense_units;
  std::vector<Activation> activations;
  double lr_min = 1e-4;
  double lr_max = 1e-2;

  /// dropout_a in {0.00, 0.05, ..., 0.50}; dropout_b, dropout_c in
  /// {0.00, ..., 0.20}; units in {32, 64, ..., 512}; relu/tanh/sigmoid;
  /// learning rate log-uniform on [1e-4, 1e-2].
  static SearchSpace standard();

  bool contains(const HyperParams& hp) const;

  /// Coordinates in [0,1]^8 used by the GP surrogate: three dropouts and
  /// units scaled to their ranges, activation one-hot, log learning rate.
  Eigen::VectorXd encode(const HyperParams& hp) const;
};

HyperParams sample(const SearchSpace& space, Rng& rng);

/// Evaluates one configuration at `resource` epochs and returns its
/// validation accuracy. Must be deterministic in (hp, resource, seed).
using Objective =
    std::function<double(const HyperParams& hp, int resource, std::uint64_t seed)>;

struct Trial {
  int id = 0;
  HyperParams hp;
  int resource = 1;
  double score = 0.0;  // -inf when the objective threw
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  int bracket = -1;  // hyperband only
  int rung = -1;
  std::string error;

  bool failed() const { return !error.empty(); }
};

struct SearchResult {
  Trial best;
  std::vector<Trial> log;
};

/// Highest score in the log; ties go to the lowest trial id. Throws
/// NumericError when every trial failed.
Trial best_of(const std::vector<Trial>& log);

SearchResult random_search(const Objective& objective, const SearchSpace& space,
                           int n_trials, int resource, Rng& rng,
                           std::size_t jobs = 1);

struct Rung {
  int n_configs = 0;
  int resource = 0;
};

struct Bracket {
  int s = 0;
  std::vector<Rung> rungs;
};

/// Successive-halving brackets s = s_max..0 with s_max = floor(log_eta R);
/// bracket s starts ceil((s_max+1)/(s+1) * eta^s) configs at R * eta^-s
/// epochs, and rung i keeps floor(n * eta^-i) configs at R * eta^(i-s).
std::vector<Bracket> hyperband_schedule(int max_resource, int eta);

/// Runs the schedule above, retraining survivors from scratch at each rung.
SearchResult hyperband(const Objective& objective, const SearchSpace& space,
                       int max_resource, int eta, Rng& rng, std::size_t jobs = 1);

struct BayesOptions {
  double length_scale = 0.2;
  double noise_variance = 1e-6;
  int n_candidates = 512;
};

/// GP + expected improvement. The first n_init points are random; each later
/// point maximizes EI over freshly sampled grid candidates.
SearchResult bayes_opt(const Objective& objective, const SearchSpace& space,
                       int n_init, int n_iter, int resource, Rng& rng,
                       const BayesOptions& options = {});

void write_trial_log(const std::vector<Trial>& log, const std::filesystem::path& path);

}  // namespace fcnet::tuner
