#include "fcnet/tuner.hpp"

#include "fcnet/error.hpp"
#include "fcnet/gp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace fcnet::tuner {

namespace {

constexpr double kFailedScore = -std::numeric_limits<double>::infinity();

std::vector<double> grid(int count, double step_den) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(i / step_den);
  return v;
}

template <class T>
const T& pick(const std::vector<T>& values, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, values.size() - 1);
  return values[dist(rng)];
}

template <class T>
bool member(const std::vector<T>& values, const T& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

void evaluate(const Objective& objective, Trial& trial) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const double score = objective(trial.hp, trial.resource, trial.seed);
    if (std::isnan(score)) throw NumericError("objective returned NaN");
    trial.score = score;
  } catch (const std::exception& e) {
    trial.score = kFailedScore;
    trial.error = e.what();
    if (trial.error.empty()) trial.error = "objective failed";
  }
  trial.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int ipow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

SearchSpace SearchSpace::standard() {
  SearchSpace s;
  s.dropout_a = grid(11, 20.0);
  s.dropout_b = grid(5, 20.0);
  s.dropout_c = grid(5, 20.0);
  for (int u = 32; u <= 512; u += 32) s.dense_units.push_back(u);
  s.activations = {Activation::relu, Activation::tanh, Activation::sigmoid};
  return s;
}

bool SearchSpace::contains(const HyperParams& hp) const {
  return member(dropout_a, hp.dropout_a) && member(dropout_b, hp.dropout_b) &&
         member(dropout_c, hp.dropout_c) && member(dense_units, hp.dense_units) &&
         member(activations, hp.activation) && hp.learning_rate >= lr_min &&
         hp.learning_rate <= lr_max;
}

Eigen::VectorXd SearchSpace::encode(const HyperParams& hp) const {
  const auto scale = [](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.0;
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
  x(0) = scale(hp.dropout_a, dropout_a.front(), dropout_a.back());
  x(1) = scale(hp.dropout_b, dropout_b.front(), dropout_b.back());
  x(2) = scale(hp.dropout_c, dropout_c.front(), dropout_c.back());
  x(3) = scale(hp.dense_units, dense_units.front(), dense_units.back());
  for (std::size_t a = 0; a < activations.size() && a < 3; ++a) {
    x(4 + static_cast<Eigen::Index>(a)) = activations[a] == hp.activation ? 1.0 : 0.0;
  }
  x(7) = scale(std::log(hp.learning_rate), std::log(lr_min), std::log(lr_max));
  return x;
}

HyperParams sample(const SearchSpace& space, Rng& rng) {
  HyperParams hp;
  hp.dropout_a = pick(space.dropout_a, rng);
  hp.dropout_b = pick(space.dropout_b, rng);
  hp.dropout_c = pick(space.dropout_c, rng);
  hp.dense_units = pick(space.dense_units, rng);
  hp.activation = pick(space.activations, rng);
  std::uniform_real_distribution<double> log_lr(std::log(space.lr_min),
                                                std::log(space.lr_max));
  hp.learning_rate = std::clamp(std::exp(log_lr(rng)), space.lr_min, space.lr_max);
  return hp;
}

Trial best_of(const std::vector<Trial>& log) {
  const Trial* best = nullptr;
  for (const auto& t : log) {
    if (t.failed()) continue;
    if (!best || t.score > best->score || (t.score == best->score && t.id < best->id)) {
      best = &t;
    }
  }
  if (!best) throw NumericError("every tuning trial failed");
  return *best;
}

SearchResult random_search(const Objective& objective, const SearchSpace& space,
                           int n_trials, int resource, Rng& rng, std::size_t jobs) {
  if (n_trials < 1) throw UsageError("random search needs at least one trial");
  if (resource < 1) throw UsageError("trial resource must be at least 1");
  const std::uint64_t base = rng();
  SearchResult result;
  result.log.resize(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) {
    auto& t = result.log[static_cast<std::size_t>(i)];
    t.id = i;
    t.hp = sample(space, rng);
    t.resource = resource;
    t.seed = derive_seed(base, static_cast<std::uint64_t>(i));
  }
  parallel_for(result.log.size(), jobs,
               [&](std::size_t i) { evaluate(objective, result.log[i]); });
  result.best = best_of(result.log);
  return result;
}

std::vector<Bracket> hyperband_schedule(int max_resource, int eta) {
  if (eta < 2 || max_resource < eta) {
    throw UsageError("hyperband needs R >= eta >= 2");
  }
  int s_max = 0;
  while (static_cast<long>(ipow(eta, s_max + 1)) <= max_resource) ++s_max;
  std::vector<Bracket> brackets;
  for (int s = s_max; s >= 0; --s) {
    Bracket b;
    b.s = s;
    const long eta_s = ipow(eta, s);
    const long n = ((s_max + 1) * eta_s + s) / (s + 1);  // ceil
    for (int i = 0; i <= s; ++i) {
      Rung r;
      r.n_configs = static_cast<int>(n / ipow(eta, i));
      r.resource = static_cast<int>(static_cast<long>(max_resource) * ipow(eta, i) / eta_s);
      b.rungs.push_back(r);
    }
    brackets.push_back(std::move(b));
  }
  return brackets;
}

SearchResult hyperband(const Objective& objective, const SearchSpace& space,
                       int max_resource, int eta, Rng& rng, std::size_t jobs) {
  const auto schedule = hyperband_schedule(max_resource, eta);
  const std::uint64_t base = rng();
  SearchResult result;
  int next_id = 0;
  std::uint64_t config_index = 0;

  for (std::size_t bi = 0; bi < schedule.size(); ++bi) {
    const auto& bracket = schedule[bi];
    struct Config {
      HyperParams hp;
      std::uint64_t seed;
    };
    std::vector<Config> configs;
    for (int c = 0; c < bracket.rungs.front().n_configs; ++c) {
      configs.push_back({sample(space, rng), derive_seed(base, config_index++)});
    }
    for (std::size_t ri = 0; ri < bracket.rungs.size(); ++ri) {
      const auto& rung = bracket.rungs[ri];
      configs.resize(static_cast<std::size_t>(rung.n_configs));
      std::vector<Trial> trials(configs.size());
      for (std::size_t c = 0; c < configs.size(); ++c) {
        auto& t = trials[c];
        t.id = next_id++;
        t.hp = configs[c].hp;
        t.seed = configs[c].seed;
        t.resource = rung.resource;
        t.bracket = bracket.s;
        t.rung = static_cast<int>(ri);
      }
      parallel_for(trials.size(), jobs,
                   [&](std::size_t c) { evaluate(objective, trials[c]); });
      // Survivors: best scores first, earlier trials win ties.
      std::vector<std::size_t> order(trials.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return trials[a].score > trials[b].score;
      });
      std::vector<Config> ranked;
      for (const auto idx : order) ranked.push_back(configs[idx]);
      configs = std::move(ranked);
      result.log.insert(result.log.end(), trials.begin(), trials.end());
    }
  }
  result.best = best_of(result.log);
  return result;
}

SearchResult bayes_opt(const Objective& objective, const SearchSpace& space,
                       int n_init, int n_iter, int resource, Rng& rng,
                       const BayesOptions& options) {
  if (n_init < 2) throw UsageError("bayesian optimization needs n_init >= 2");
  if (n_iter < 0) throw UsageError("n_iter must be nonnegative");
  if (resource < 1) throw UsageError("trial resource must be at least 1");
  const std::uint64_t base = rng();
  SearchResult result;

  const auto run = [&](const HyperParams& hp) {
    Trial t;
    t.id = static_cast<int>(result.log.size());
    t.hp = hp;
    t.resource = resource;
    t.seed = derive_seed(base, static_cast<std::uint64_t>(t.id));
    evaluate(objective, t);
    result.log.push_back(std::move(t));
  };

  for (int i = 0; i < n_init; ++i) run(sample(space, rng));

  GaussianProcess gp(options.length_scale, 1.0, options.noise_variance);
  for (int it = 0; it < n_iter; ++it) {
    std::vector<const Trial*> ok;
    for (const auto& t : result.log) {
      if (!t.failed()) ok.push_back(&t);
    }
    // Candidates are drawn every iteration so the rng stream is fixed.
    std::vector<HyperParams> candidates;
    candidates.reserve(static_cast<std::size_t>(options.n_candidates));
    for (int c = 0; c < options.n_candidates; ++c) candidates.push_back(sample(space, rng));
    if (ok.empty()) {
      run(candidates.front());
      continue;
    }

    const auto n = static_cast<Eigen::Index>(ok.size());
    Eigen::MatrixXd x(n, 8);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = space.encode(ok[static_cast<std::size_t>(i)]->hp).transpose();
      y(i) = ok[static_cast<std::size_t>(i)]->score;
    }
    const double mean = y.mean();
    double sd = std::sqrt((y.array() - mean).square().mean());
    if (!(sd > 1e-12)) sd = 1.0;
    const Eigen::VectorXd z = (y.array() - mean) / sd;
    gp.fit(x, z);
    const double best = z.maxCoeff();

    std::size_t pick_idx = 0;
    double best_ei = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double ei = gp.expected_improvement(space.encode(candidates[c]), best);
      if (ei > best_ei) {
        best_ei = ei;
        pick_idx = c;
      }
    }
    run(candidates[pick_idx]);
  }
  result.best = best_of(result.log);
  return result;
}

void write_trial_log(const std::vector<Trial>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "trial_id,dropout_a,dropout_b,dropout_c,dense_units,activation,learning_rate,"
         "resource,score,wall_time\n";
  for (const auto& t : log) {
    out << t.id << ',' << t.hp.dropout_a << ',' << t.hp.dropout_b << ','
        << t.hp.dropout_c << ',' << t.hp.dense_units << ',' << to_string(t.hp.activation)
        << ',' << t.hp.learning_rate << ',' << t.resource << ',';
    if (t.failed()) {
      out << "-inf";
    } else {
      out << t.score;
    }
    out << ',' << t.wall_time << '\n';
  }
}

}  // namespace fcnet::tuner
