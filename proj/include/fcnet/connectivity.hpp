#pragma once

#include "fcnet/signal.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fcnet {

enum class ConnectivityMethod { pearson, spearman, granger };

std::string to_string(ConnectivityMethod method);
ConnectivityMethod connectivity_method_from_string(const std::string& name);

struct FixedLag {
  int lag = 1;
};
struct BicLag {
  int max_lag = 8;
};
using LagPolicy = std::variant<FixedLag, BicLag>;

std::string describe(const LagPolicy& policy);

/// N x N matrix of pairwise connection strengths over a channel montage.
///
/// Correlation matrices are symmetric with a unit diagonal. Granger matrices
/// are directed 0/1 adjacency: values(i, j) == 1 means channel j
/// Granger-causes channel i (row is the predicted target).
struct ConnectivityMatrix {
  Eigen::MatrixXd values;
  ConnectivityMethod method = ConnectivityMethod::pearson;
  bool directed = false;
  std::optional<double> alpha;
  std::optional<LagPolicy> lag_policy;
  std::vector<std::string> channel_labels;
  std::string subject_id;
};

/// Least-squares comparison of an own-lag model against one augmented with
/// a second series' lags.
struct VarFit {
  int lag_order = 1;
  double rss_restricted = 0.0;
  double rss_unrestricted = 0.0;
  int n_obs = 0;
  double f_statistic = 0.0;
  double p_value = 1.0;
};

/// Average ranks, 1-based; ties share the mean of the ranks they span.
std::vector<double> rank_transform(std::span<const double> series);

ConnectivityMatrix pearson_matrix(const Recording& rec);
ConnectivityMatrix spearman_matrix(const Recording& rec);

/// Upper tail probability of the F(d1, d2) distribution.
double f_survival(double f, double d1, double d2);

/// Tests whether `driver` helps predict `target` beyond target's own past,
/// with `lag` lags of each series plus an intercept.
VarFit fit_var_pair(std::span<const double> target, std::span<const double> driver,
                    int lag);

/// Lag in [1, max_lag] minimizing BIC of the unrestricted pair model. All
/// candidates are scored on the same estimation window (t >= max_lag) so
/// their likelihoods are comparable; ties resolve to the smaller lag.
int select_lag(std::span<const double> target, std::span<const double> driver,
               int max_lag);

/// Pairwise bivariate Granger adjacency at level alpha (strict p < alpha).
/// Pair fits are spread over `jobs` threads; the result does not depend on it.
ConnectivityMatrix granger_matrix(const Recording& rec, double alpha = 0.05,
                                  const LagPolicy& lag_policy = BicLag{8},
                                  std::size_t jobs = 1);

/// Writes the matrix CSV (header = channel labels) and a JSON sidecar
/// at `<csv path>.json` with method, alpha, lag policy and subject.
void write_connectivity(const ConnectivityMatrix& m,
                        const std::filesystem::path& csv_path);
ConnectivityMatrix read_connectivity(const std::filesystem::path& csv_path);

}  // namespace fcnet
