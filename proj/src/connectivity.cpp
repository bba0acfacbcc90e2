#include "fcnet/connectivity.hpp"

#include "fcnet/error.hpp"
#include "fcnet/util.hpp"

#include <Eigen/QR>
#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace fcnet {

std::string to_string(ConnectivityMethod method) {
  switch (method) {
    case ConnectivityMethod::pearson: return "pearson";
    case ConnectivityMethod::spearman: return "spearman";
    case ConnectivityMethod::granger: return "granger";
  }
  return "unknown";
}

ConnectivityMethod connectivity_method_from_string(const std::string& name) {
  if (name == "pearson") return ConnectivityMethod::pearson;
  if (name == "spearman") return ConnectivityMethod::spearman;
  if (name == "granger") return ConnectivityMethod::granger;
  throw UsageError("unknown connectivity method '" + name + "'");
}

std::string describe(const LagPolicy& policy) {
  if (const auto* fixed = std::get_if<FixedLag>(&policy)) {
    return "fixed(" + std::to_string(fixed->lag) + ")";
  }
  return "bic(" + std::to_string(std::get<BicLag>(policy).max_lag) + ")";
}

std::vector<double> rank_transform(std::span<const double> series) {
  const std::size_t n = series.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return series[a] < series[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && series[order[j]] == series[order[i]]) ++j;
    // Ranks i+1 .. j share their midpoint; (i+1+j) is exact in double.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

// Correlation of every channel pair from centered, unit-norm rows.
Eigen::MatrixXd correlation_of_rows(const SignalMatrix& data,
                                    const std::vector<std::string>& labels,
                                    const std::string& subject) {
  SignalMatrix centered = data;
  for (Eigen::Index c = 0; c < centered.rows(); ++c) {
    auto row = centered.row(c);
    row.array() -= row.mean();
    const double norm = row.norm();
    if (!(norm > 0.0)) {
      throw DataError("recording '" + subject + "': channel '" +
                      labels[static_cast<std::size_t>(c)] + "' is constant");
    }
    row /= norm;
  }
  const Eigen::Index n = centered.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::clamp(centered.row(i).dot(centered.row(j)), -1.0, 1.0);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

ConnectivityMatrix make_correlation(const Recording& rec, const SignalMatrix& data,
                                    ConnectivityMethod method) {
  ConnectivityMatrix m;
  m.values = correlation_of_rows(data, rec.channel_labels, rec.subject_id);
  m.method = method;
  m.directed = false;
  m.channel_labels = rec.channel_labels;
  m.subject_id = rec.subject_id;
  return m;
}

struct OlsResult {
  double rss = 0.0;
};

// Regresses target[t] on an intercept, target[t-1..t-lag] and, when
// `with_driver`, driver[t-1..t-lag], over t in [start, T).
OlsResult ols_lagged(std::span<const double> target, std::span<const double> driver,
                     int lag, std::size_t start, bool with_driver) {
  const auto T = target.size();
  const auto n = static_cast<Eigen::Index>(T - start);
  const Eigen::Index p = 1 + lag * (with_driver ? 2 : 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t t = start + static_cast<std::size_t>(r);
    y(r) = target[t];
    X(r, 0) = 1.0;
    for (int k = 1; k <= lag; ++k) {
      X(r, k) = target[t - static_cast<std::size_t>(k)];
      if (with_driver) X(r, lag + k) = driver[t - static_cast<std::size_t>(k)];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw NumericError("singular design matrix (rank " + std::to_string(qr.rank()) +
                       " of " + std::to_string(p) + ")");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  return {resid.squaredNorm()};
}

void check_pair(std::span<const double> target, std::span<const double> driver) {
  if (target.size() != driver.size()) {
    throw DataError("target and driver lengths differ");
  }
  for (const double v : target) {
    if (!std::isfinite(v)) throw DataError("non-finite value in target series");
  }
  for (const double v : driver) {
    if (!std::isfinite(v)) throw DataError("non-finite value in driver series");
  }
}

}  // namespace

ConnectivityMatrix pearson_matrix(const Recording& rec) {
  return make_correlation(rec, rec.data, ConnectivityMethod::pearson);
}

ConnectivityMatrix spearman_matrix(const Recording& rec) {
  SignalMatrix ranked(rec.data.rows(), rec.data.cols());
  for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
    const auto ranks = rank_transform(
        std::span<const double>(rec.data.row(c).data(), rec.n_samples()));
    ranked.row(c) = Eigen::Map<const Eigen::RowVectorXd>(
        ranks.data(), static_cast<Eigen::Index>(ranks.size()));
  }
  return make_correlation(rec, ranked, ConnectivityMethod::spearman);
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw NumericError("F degrees of freedom must be positive");
  if (std::isnan(f)) throw NumericError("F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const boost::math::fisher_f_distribution<double> dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

VarFit fit_var_pair(std::span<const double> target, std::span<const double> driver,
                    int lag) {
  check_pair(target, driver);
  if (lag < 1) throw UsageError("lag must be at least 1");
  const auto T = static_cast<long>(target.size());
  if (T - lag <= 2L * lag + 1) {
    throw DataError("series of length " + std::to_string(T) +
                    " is too short for lag " + std::to_string(lag));
  }
  VarFit fit;
  fit.lag_order = lag;
  fit.n_obs = static_cast<int>(T - lag);
  const auto start = static_cast<std::size_t>(lag);
  fit.rss_restricted = ols_lagged(target, driver, lag, start, false).rss;
  fit.rss_unrestricted = ols_lagged(target, driver, lag, start, true).rss;

  const double df1 = lag;
  const double df2 = fit.n_obs - 2.0 * lag - 1.0;
  const double gain = std::max(0.0, fit.rss_restricted - fit.rss_unrestricted);
  if (fit.rss_unrestricted <= 0.0) {
    fit.f_statistic = gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    fit.f_statistic = (gain / df1) / (fit.rss_unrestricted / df2);
  }
  fit.p_value = f_survival(fit.f_statistic, df1, df2);
  return fit;
}

int select_lag(std::span<const double> target, std::span<const double> driver,
               int max_lag) {
  check_pair(target, driver);
  if (max_lag < 1) throw UsageError("max_lag must be at least 1");
  if (max_lag == 1) return 1;
  const auto T = static_cast<long>(target.size());
  if (T - max_lag <= 2L * max_lag + 1) {
    throw DataError("series of length " + std::to_string(T) +
                    " is too short for max lag " + std::to_string(max_lag));
  }
  const auto start = static_cast<std::size_t>(max_lag);
  const double n = static_cast<double>(T - max_lag);
  int best_lag = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int lag = 1; lag <= max_lag; ++lag) {
    const double rss = ols_lagged(target, driver, lag, start, true).rss;
    const double k = 1.0 + 2.0 * lag;
    const double bic = n * std::log(std::max(rss, std::numeric_limits<double>::min()) / n) +
                       k * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best_lag = lag;
    }
  }
  return best_lag;
}

ConnectivityMatrix granger_matrix(const Recording& rec, double alpha,
                                  const LagPolicy& lag_policy, std::size_t jobs) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (const auto* fixed = std::get_if<FixedLag>(&lag_policy); fixed && fixed->lag < 1) {
    throw UsageError("fixed lag must be at least 1");
  }
  const auto n = static_cast<Eigen::Index>(rec.n_channels());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto row = rec.data.row(c);
    if ((row.array() == row(0)).all()) {
      throw DataError("recording '" + rec.subject_id + "': channel '" +
                      rec.channel_labels[static_cast<std::size_t>(c)] +
                      "' is constant");
    }
  }

  ConnectivityMatrix m;
  m.values = Eigen::MatrixXd::Zero(n, n);
  m.method = ConnectivityMethod::granger;
  m.directed = true;
  m.alpha = alpha;
  m.lag_policy = lag_policy;
  m.channel_labels = rec.channel_labels;
  m.subject_id = rec.subject_id;

  const auto T = rec.n_samples();
  const auto n_pairs = static_cast<std::size_t>(n * n);
  parallel_for(n_pairs, jobs, [&](std::size_t k) {
    const auto i = static_cast<Eigen::Index>(k) / n;  // target
    const auto j = static_cast<Eigen::Index>(k) % n;  // driver
    if (i == j) return;
    const std::span<const double> target(rec.data.row(i).data(), T);
    const std::span<const double> driver(rec.data.row(j).data(), T);
    try {
      int lag = 1;
      if (const auto* fixed = std::get_if<FixedLag>(&lag_policy)) {
        lag = fixed->lag;
      } else {
        lag = select_lag(target, driver, std::get<BicLag>(lag_policy).max_lag);
      }
      const VarFit fit = fit_var_pair(target, driver, lag);
      m.values(i, j) = fit.p_value < alpha ? 1.0 : 0.0;
    } catch (const std::exception& e) {
      const std::string where = "recording '" + rec.subject_id + "', driver '" +
                                rec.channel_labels[static_cast<std::size_t>(j)] +
                                "' -> target '" +
                                rec.channel_labels[static_cast<std::size_t>(i)] +
                                "': " + e.what();
      if (dynamic_cast<const NumericError*>(&e)) throw NumericError(where);
      throw DataError(where);
    }
  });
  return m;
}

void write_connectivity(const ConnectivityMatrix& m,
                        const std::filesystem::path& csv_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write '" + csv_path.string() + "'");
    for (std::size_t c = 0; c < m.channel_labels.size(); ++c) {
      if (c) out << ',';
      out << m.channel_labels[c];
    }
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        if (j) out << ',';
        const auto res = std::to_chars(buf, buf + sizeof(buf), m.values(i, j));
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
  nlohmann::json meta;
  meta["method"] = to_string(m.method);
  meta["directed"] = m.directed;
  meta["alpha"] = m.alpha ? nlohmann::json(*m.alpha) : nlohmann::json(nullptr);
  meta["lag_policy"] = m.lag_policy ? nlohmann::json(describe(*m.lag_policy))
                                    : nlohmann::json(nullptr);
  meta["subject_id"] = m.subject_id;
  meta["n_channels"] = m.channel_labels.size();
  std::ofstream side(csv_path.string() + ".json");
  side << meta.dump(2) << '\n';
}

ConnectivityMatrix read_connectivity(const std::filesystem::path& csv_path) {
  const Recording grid = load_recording(csv_path);
  if (grid.n_samples() != grid.n_channels()) {
    throw DataError("connectivity matrix '" + csv_path.string() + "' is not square");
  }
  ConnectivityMatrix m;
  m.channel_labels = grid.channel_labels;
  // The loader stores columns as rows; transpose back.
  m.values = grid.data.transpose();
  std::ifstream side(csv_path.string() + ".json");
  if (side) {
    nlohmann::json meta;
    side >> meta;
    m.method = connectivity_method_from_string(meta.at("method").get<std::string>());
    m.directed = meta.value("directed", false);
    if (!meta["alpha"].is_null()) m.alpha = meta["alpha"].get<double>();
    m.subject_id = meta.value("subject_id", "");
    if (meta.contains("lag_policy") && meta["lag_policy"].is_string()) {
      const auto text = meta["lag_policy"].get<std::string>();
      const auto open = text.find('('), close = text.find(')');
      const int k = std::stoi(text.substr(open + 1, close - open - 1));
      if (text.rfind("fixed", 0) == 0) {
        m.lag_policy = FixedLag{k};
      } else {
        m.lag_policy = BicLag{k};
      }
    }
  }
  return m;
}

}  // namespace fcnet
