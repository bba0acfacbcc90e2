// Acceptance suite. Prints one PASS/FAIL line per criterion.
// Usage: fcnet_acceptance [criterion numbers...]   (default: all)

#include "fcnet/connectivity.hpp"
#include "fcnet/evalmetrics.hpp"
#include "fcnet/nn.hpp"
#include "fcnet/pipeline.hpp"
#include "fcnet/report.hpp"
#include "fcnet/synthgen.hpp"
#include "fcnet/tuner.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace fcnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<double> row(const Recording& r, int c) {
  return {r.data.row(c).begin(), r.data.row(c).end()};
}

Recording noise_rec(int channels, int samples, Rng& rng, bool quantize = false) {
  std::normal_distribution<double> g;
  Recording r;
  r.subject_id = "n";
  r.data.resize(channels, samples);
  for (int c = 0; c < channels; ++c) {
    r.channel_labels.push_back("c" + std::to_string(c));
    for (int t = 0; t < samples; ++t) {
      const double v = g(rng);
      r.data(c, t) = quantize ? std::round(v * 4.0) / 4.0 : v;
    }
  }
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "fcnet_acceptance" / name;
  fs::create_directories(dir);
  return dir;
}

// 1 -----------------------------------------------------------------------
Outcome correlation_oracle() {
  Rng rng(101);
  std::uniform_int_distribution<int> ch(2, 19);
  std::uniform_int_distribution<int> len(3, 1024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool full = trial < 5;
    const int c = full ? 19 : ch(rng);
    const int t = full ? 1024 : len(rng);
    Recording r = noise_rec(c, t, rng, trial % 3 == 0);
    // Guard against a quantized channel collapsing to a constant.
    for (int i = 0; i < c; ++i) r.data(i, 0) += 10.0 + i;
    const auto p = pearson_matrix(r);
    const auto s = spearman_matrix(r);
    std::vector<std::vector<double>> rows(c), ranked(c);
    for (int i = 0; i < c; ++i) {
      rows[i] = row(r, i);
      ranked[i] = oracle::ranks(rows[i]);
    }
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) {
        worst = std::max(worst, std::abs(p.values(i, j) - oracle::pearson(rows[i], rows[j])));
        worst = std::max(worst, std::abs(s.values(i, j) - oracle::pearson(ranked[i], ranked[j])));
      }
    }
  }
  return {worst <= 1e-12, "max |library - oracle| = " + fmt("%.2e", worst) + " (tol 1e-12)"};
}

// 2 -----------------------------------------------------------------------
Outcome granger_calibration() {
  Rng rng(202);
  int hits = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    const auto r = noise_rec(2, 1024, rng);
    if (fit_var_pair(row(r, 0), row(r, 1), 1).p_value < 0.05) ++hits;
  }
  const double rate = static_cast<double>(hits) / trials;
  return {rate >= 0.03 && rate <= 0.07,
          "rate(p<0.05) = " + fmt("%.4f", rate) + " over 2000 pairs (band [0.03, 0.07])"};
}

// 3 -----------------------------------------------------------------------
Outcome granger_power() {
  synth::VarNetworkSpec spec;
  spec.n_channels = 2;
  spec.adjacency = Eigen::MatrixXd::Zero(2, 2);
  spec.adjacency(1, 0) = 0.8;
  spec.n_samples = 1024;
  Rng rng(303);
  int forward = 0, reverse = 0, exact = 0;
  const int trials = 500;
  for (int i = 0; i < trials; ++i) {
    const auto m = granger_matrix(synth::simulate_var(spec, rng));
    const bool f = m.values(1, 0) == 1.0, b = m.values(0, 1) == 1.0;
    forward += f;
    reverse += b;
    exact += f && !b;
  }
  const double power = forward / 500.0, fp = reverse / 500.0;
  return {power >= 0.95 && fp <= 0.10,
          "planted edge found " + fmt("%.3f", power) + " (>= 0.95), reverse false positive " +
              fmt("%.3f", fp) + " (<= 0.10); exact set " + fmt("%.3f", exact / 500.0)};
}

// 4 -----------------------------------------------------------------------
Outcome architecture() {
  std::vector<std::string> bad;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  const HyperParams hp;
  const auto t19 = nn::build_tuned_spec(19, hp);
  const auto s19 = nn::infer_shapes(t19);
  const std::vector<nn::Shape> want19 = {{17, 17, 16}, {15, 15, 16}, {7, 7, 16}, {7, 7, 16},
                                         {5, 5, 32},   {3, 3, 32},   {1, 1, 32}, {1, 1, 32},
                                         {32},         {160},        {160},      {2}};
  expect(s19 == want19, "tuned 19 shapes");
  const std::vector<std::pair<std::size_t, std::size_t>> counts = {
      {0, 160}, {1, 2320}, {4, 4640}, {5, 9248}, {9, 5280}};
  for (const auto& [layer, n] : counts) {
    expect(nn::layer_param_count(t19, layer) == n,
           "layer " + std::to_string(layer) + " params " +
               std::to_string(nn::layer_param_count(t19, layer)));
  }
  const auto s16 = nn::infer_shapes(nn::build_tuned_spec(16, hp));
  const std::vector<nn::Shape> want16 = {{14, 14, 16}, {12, 12, 16}, {6, 6, 16}, {6, 6, 16},
                                         {4, 4, 32},   {2, 2, 32},   {1, 1, 32}, {1, 1, 32},
                                         {32},         {160},        {160},      {2}};
  expect(s16 == want16, "tuned 16 shapes");
  const auto u19 = nn::infer_shapes(nn::build_untuned_spec(19));
  const std::vector<nn::Shape> wantu19 = {{18, 18, 32}, {18, 18, 32}, {17, 17, 16},
                                          {17, 17, 16}, {4624},       {10}, {1}};
  expect(u19 == wantu19, "untuned 19 shapes");
  const auto u16 = nn::infer_shapes(nn::build_untuned_spec(16));
  const std::vector<nn::Shape> wantu16 = {{15, 15, 32}, {15, 15, 32}, {14, 14, 16},
                                          {14, 14, 16}, {3136},       {10}, {1}};
  expect(u16 == wantu16, "untuned 16 shapes");
  std::string detail = "tuned 19/16 shapes, params 160/2320/4640/9248/5280, untuned flatten "
                       "4624/3136";
  for (const auto& b : bad) detail += "; MISMATCH " + b;
  return {bad.empty(), detail};
}

// 5 -----------------------------------------------------------------------
Outcome gradient_check() {
  const auto space = tuner::SearchSpace::standard();
  double worst = 0.0;
  long checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(505, seed));
    HyperParams hp = tuner::sample(space, rng);
    hp.dense_units = 8;
    const int hw = std::uniform_int_distribution<int>(16, 19)(rng);
    // Tuned layer sequence with narrow filters so every parameter can be checked.
    auto spec = nn::build_tuned_spec(hw, hp);
    spec.layers[0].filters = 3;
    spec.layers[1].filters = 3;
    spec.layers[4].filters = 4;
    spec.layers[5].filters = 4;
    nn::Model model = nn::init_model(spec, seed);
    std::normal_distribution<double> g;
    std::vector<nn::Tensor> xs;
    std::vector<int> ys;
    for (int i = 0; i < 2; ++i) {
      nn::Tensor x({static_cast<std::size_t>(hw), static_cast<std::size_t>(hw), 1});
      for (auto& v : x.values) v = g(rng);
      xs.push_back(x);
      ys.push_back(i);
    }
    const std::uint64_t mask_seed = rng();
    std::vector<double> grads;
    Rng r0(mask_seed);
    nn::backward(model, xs, ys, grads, true, &r0);
    const double h = 1e-5;
    for (std::size_t p = 0; p < model.parameters.size(); ++p) {
      const double saved = model.parameters[p];
      model.parameters[p] = saved + h;
      Rng r1(mask_seed);
      const double up = nn::batch_loss(model, xs, ys, true, &r1);
      model.parameters[p] = saved - h;
      Rng r2(mask_seed);
      const double down = nn::batch_loss(model, xs, ys, true, &r2);
      model.parameters[p] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(grads[p]), 1e-4});
      worst = std::max(worst, std::abs(numeric - grads[p]) / denom);
      ++checked;
    }
  }
  return {worst < 1e-6, "max relative error " + fmt("%.2e", worst) + " over " +
                            std::to_string(checked) +
                            " parameters, 20 seeds (tol 1e-6, denominator floor 1e-4)"};
}

// 6 -----------------------------------------------------------------------
Outcome auc_exactness() {
  Rng rng(606);
  std::uniform_int_distribution<int> n_dist(2, 12);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> level(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0, with_ties = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (int i = 0; i < n; ++i) {
      s[i] = trial % 2 ? level(rng) / 3.0 : u(rng);
      l[i] = coin(rng);
    }
    l[0] = 0;
    l[1] = 1;
    std::shuffle(l.begin(), l.end(), rng);
    const std::set<double> distinct(s.begin(), s.end());
    with_ties += distinct.size() < s.size();
    if (eval::roc_auc(s, l).auc != oracle::pair_auc(s, l)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 10000 sets (" +
                               std::to_string(with_ties) + " with ties), exact comparison"};
}

// 7 -----------------------------------------------------------------------
Outcome hyperband_schedule() {
  const auto space = tuner::SearchSpace::standard();
  const tuner::Objective obj = [](const HyperParams& hp, int r, std::uint64_t) {
    return hp.learning_rate * r;
  };
  int checked = 0;
  std::vector<std::string> bad;
  for (int eta : {2, 3}) {
    for (int R = eta; R <= 243; ++R) {
      Rng rng(static_cast<std::uint64_t>(R * 10 + eta));
      const auto result = tuner::hyperband(obj, space, R, eta, rng);
      std::map<std::pair<int, int>, std::pair<int, int>> seen;  // (s, rung) -> (n, r)
      for (const auto& t : result.log) {
        auto& e = seen[{t.bracket, t.rung}];
        ++e.first;
        if (e.second != 0 && e.second != t.resource) bad.push_back("mixed resource");
        e.second = t.resource;
      }
      const auto want = oracle::hyperband_rungs(R, eta);
      std::size_t expected_rungs = 0;
      for (const auto& bracket : want) expected_rungs += bracket.size();
      if (seen.size() != expected_rungs) {
        bad.push_back("R=" + std::to_string(R) + " eta=" + std::to_string(eta) + " rung count");
      }
      const int s_max = static_cast<int>(want.size()) - 1;
      for (int b = 0; b <= s_max; ++b) {
        const int s = s_max - b;
        for (int i = 0; i <= s; ++i) {
          const auto it = seen.find({s, i});
          if (it == seen.end() || it->second.first != want[b][i].n ||
              it->second.second != want[b][i].r) {
            bad.push_back("R=" + std::to_string(R) + " eta=" + std::to_string(eta) + " s=" +
                          std::to_string(s) + " rung " + std::to_string(i));
          }
        }
      }
      ++checked;
    }
  }
  // The headline bracket.
  Rng rng(81);
  const auto r81 = tuner::hyperband(obj, space, 81, 3, rng);
  std::string seq;
  for (int i = 0; i <= 4; ++i) {
    int n = 0, r = 0;
    for (const auto& t : r81.log) {
      if (t.bracket == 4 && t.rung == i) {
        ++n;
        r = t.resource;
      }
    }
    seq += (i ? " -> " : "") + std::to_string(n) + "@" + std::to_string(r);
  }
  const bool headline = seq == "81@1 -> 27@3 -> 9@9 -> 3@27 -> 1@81";
  std::string detail = "R=81 eta=3 bracket s=4: " + seq + "; " + std::to_string(checked) +
                       " (R, eta) pairs executed vs enumerator";
  if (!bad.empty()) detail += "; first mismatch " + bad.front();
  return {headline && bad.empty(), detail};
}

// End-to-end configurations ------------------------------------------------
pipeline::RunConfig planted_config() {
  pipeline::RunConfig c;
  c.input.preset = "ad_like";
  c.connectivity = pipeline::InputPathway::pearson;
  c.model = eval::ModelFamily::tuned;
  c.tuner = eval::TunerKind::random;
  c.budget.random_trials = 8;
  c.budget.max_epochs = 30;
  c.k = 5;
  c.inner.kind = eval::InnerPolicy::Kind::folds;
  c.inner.folds = 3;
  c.seed = 0;
  return c;
}

// Reduced budget so five pearson-vs-raw replicates fit the time limit.
pipeline::RunConfig compare_config(std::uint64_t seed) {
  pipeline::RunConfig c;
  c.input.preset = "ad_like";
  c.tuner = eval::TunerKind::random;
  c.budget.random_trials = 4;
  c.budget.max_epochs = 20;
  c.k = 5;
  c.inner.kind = eval::InnerPolicy::Kind::holdout;
  c.seed = seed;
  return c;
}

// 8 -----------------------------------------------------------------------
Outcome planted_signal() {
  const auto ex = pipeline::run_experiment(planted_config());
  const double auc = ex.report.mean_test_auc();
  return {auc >= 0.90, "ad_like pearson/tuned/random(8 trials, 30 epochs) k=5: mean test AUC " +
                           fmt("%.3f", auc) + " (>= 0.90)"};
}

// 9 -----------------------------------------------------------------------
Outcome connectivity_beats_raw() {
  int wins = 0;
  std::string per;
  std::ostringstream sink;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto a = compare_config(seed);
    auto b = a;
    b.connectivity = pipeline::InputPathway::raw;
    const auto cmp = pipeline::cmd_compare(a, b, false, sink);
    wins += cmp.delta_auc > 0.0;
    per += (seed > 1 ? ", " : "") + fmt("%.3f", cmp.a.mean_test_auc()) + "/" +
           fmt("%.3f", cmp.b.mean_test_auc());
  }
  return {wins >= 4, std::to_string(wins) + "/5 replicates with AUC(pearson) > AUC(raw) [" +
                         per + "] (need >= 4)"};
}

// 10 ----------------------------------------------------------------------
Outcome null_sanity() {
  auto c = planted_config();
  c.input.preset = "null";
  const double auc = pipeline::run_experiment(c).report.mean_test_auc();
  return {std::abs(auc - 0.5) <= 0.15,
          "null cohort mean test AUC " + fmt("%.3f", auc) + " (band 0.5 +- 0.15)"};
}

// 11 ----------------------------------------------------------------------
Outcome determinism() {
  auto c = compare_config(11);
  c.output_dir = scratch_dir("determinism").string();
  std::ostringstream sink;
  const auto first = pipeline::cmd_run(c, sink);
  const auto replay = pipeline::load_config(first.dir / "manifest.json");
  const auto second = pipeline::cmd_run(replay, sink);
  std::stringstream a, b;
  a << std::ifstream(first.dir / "report.json").rdbuf();
  b << std::ifstream(second.dir / "report.json").rdbuf();
  const bool same = first.digest == second.digest && a.str() == b.str();
  return {same, "digest " + first.digest + " vs " + second.digest +
                    (a.str() == b.str() ? ", report.json byte-identical"
                                        : ", report.json differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "correlation oracle equivalence", 30, correlation_oracle},
      {2, "granger calibration", 120, granger_calibration},
      {3, "granger power and direction", 120, granger_power},
      {4, "architecture fidelity", 5, architecture},
      {5, "gradient correctness", 60, gradient_check},
      {6, "AUC exactness", 30, auc_exactness},
      {7, "hyperband schedule", 30, hyperband_schedule},
      {8, "planted-signal end to end", 600, planted_signal},
      {9, "connectivity beats raw", 1800, connectivity_beats_raw},
      {10, "null sanity", 600, null_sanity},
      {11, "determinism", 600, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "C" << c.id << " " << c.name << " | "
              << o.detail << " | " << fmt("%.1f", secs) << " s (limit "
              << fmt("%.0f", c.time_limit_s) << " s)" << (in_time ? "" : " TOO SLOW") << '\n'
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
