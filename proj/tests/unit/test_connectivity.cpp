#include "fcnet/connectivity.hpp"
#include "fcnet/error.hpp"
#include "fcnet/synthgen.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace fcnet;

namespace {

Recording from_rows(const std::vector<std::vector<double>>& rows) {
  Recording r;
  r.subject_id = "t";
  r.data.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    r.channel_labels.push_back("c" + std::to_string(c));
    for (std::size_t t = 0; t < rows[c].size(); ++t) {
      r.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[c][t];
    }
  }
  return r;
}

Recording noise_rec(int channels, int samples, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> rows(channels, std::vector<double>(samples));
  for (auto& row : rows) {
    for (auto& v : row) v = g(rng);
  }
  return from_rows(rows);
}

std::vector<double> row(const Recording& r, int c) {
  return {r.data.row(c).begin(), r.data.row(c).end()};
}

// ch1[t] = coupling * ch0[t-1] + noise; ch0 is an autonomous AR(1).
Recording planted_pair(double coupling, int samples, Rng& rng) {
  synth::VarNetworkSpec spec;
  spec.n_channels = 2;
  spec.adjacency = Eigen::MatrixXd::Zero(2, 2);
  spec.adjacency(1, 0) = coupling;
  spec.n_samples = samples;
  return synth::simulate_var(spec, rng);
}

}  // namespace

TEST_SUITE("connectivity") {
  TEST_CASE("rank_transform") {
    const std::vector<double> a{10, 20, 30};
    CHECK(rank_transform(a) == std::vector<double>{1, 2, 3});
    const std::vector<double> b{5, 5};
    CHECK(rank_transform(b) == std::vector<double>{1.5, 1.5});
    const std::vector<double> c{3, 1, 4, 1};
    CHECK(rank_transform(c) == oracle::ranks(c));
    CHECK(rank_transform(c) == std::vector<double>{3, 1.5, 4, 1.5});
    const std::vector<double> d{1, 2, 2, 4};
    CHECK(rank_transform(d) == std::vector<double>{1, 2.5, 2.5, 4});
  }

  TEST_CASE("rank_transform matches the counting oracle on tied data") {
    Rng rng(5);
    std::uniform_int_distribution<int> v(0, 6);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(static_cast<std::size_t>(1 + trial % 30));
      for (auto& e : x) e = v(rng);
      CHECK(rank_transform(x) == oracle::ranks(x));
    }
  }

  TEST_CASE("pearson examples") {
    const std::vector<double> x{1, 2, 3, 4}, y{1, 2, 3, 5};
    const auto m = pearson_matrix(from_rows({x, y, {-1, -2, -3, -4}}));
    CHECK(m.values(0, 1) == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-14));
    CHECK(m.values(0, 1) == doctest::Approx(0.9827).epsilon(1e-4));
    CHECK(m.values(0, 0) == 1.0);
    CHECK(m.values(0, 2) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK_FALSE(m.directed);
  }

  TEST_CASE("spearman examples") {
    const std::vector<double> x{-2, 0.5, 1, 3, 7};
    std::vector<double> cube, neg;
    for (double v : x) {
      cube.push_back(v * v * v);
      neg.push_back(-v);
    }
    const auto m = spearman_matrix(from_rows({x, cube, neg}));
    CHECK(m.values(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.values(0, 2) == doctest::Approx(-1.0).epsilon(1e-14));
  }

  TEST_CASE("correlation matrices agree with the oracle and keep their invariants") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const int ch = 2 + trial % 6;
      const auto r = noise_rec(ch, 40 + 7 * trial, rng);
      const auto p = pearson_matrix(r);
      const auto s = spearman_matrix(r);
      for (int i = 0; i < ch; ++i) {
        CHECK(p.values(i, i) == 1.0);
        CHECK(s.values(i, i) == 1.0);
        for (int j = 0; j < ch; ++j) {
          CHECK(p.values(i, j) == p.values(j, i));
          CHECK(std::abs(p.values(i, j)) <= 1.0);
          CHECK(std::abs(p.values(i, j) - oracle::pearson(row(r, i), row(r, j))) < 1e-12);
          CHECK(std::abs(s.values(i, j) - oracle::spearman(row(r, i), row(r, j))) < 1e-12);
        }
      }
    }
  }

  TEST_CASE("affine and monotone invariance") {
    Rng rng(3);
    auto r = noise_rec(4, 200, rng);
    const auto p0 = pearson_matrix(r);
    const auto s0 = spearman_matrix(r);
    auto scaled = r;
    scaled.data.row(1) = scaled.data.row(1) * 7.5 + Eigen::RowVectorXd::Constant(200, -3.0);
    CHECK((pearson_matrix(scaled).values - p0.values).cwiseAbs().maxCoeff() < 1e-10);
    auto warped = r;
    warped.data.row(2) = warped.data.row(2).array().exp();
    CHECK((spearman_matrix(warped).values - s0.values).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("constant channel is rejected") {
    auto r = from_rows({{1, 2, 3, 4}, {2, 2, 2, 2}});
    CHECK_THROWS_AS(pearson_matrix(r), DataError);
  }

  TEST_CASE("fit_var_pair with a shifted copy is perfectly predictable") {
    Rng rng(8);
    std::normal_distribution<double> g;
    std::vector<double> driver(300), target(300);
    for (auto& v : driver) v = g(rng);
    target[0] = g(rng);
    for (std::size_t t = 1; t < 300; ++t) target[t] = driver[t - 1];
    const auto fit = fit_var_pair(target, driver, 1);
    CHECK(fit.rss_unrestricted < 1e-18 * fit.rss_restricted + 1e-20);
    CHECK(fit.p_value < 1e-10);
    CHECK(fit.n_obs == 299);
  }

  TEST_CASE("fit_var_pair properties on random data") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const auto r = noise_rec(2, 100 + trial, rng);
      const int lag = 1 + trial % 4;
      const auto fit = fit_var_pair(row(r, 0), row(r, 1), lag);
      CHECK(fit.rss_unrestricted <= fit.rss_restricted + 1e-9);
      CHECK(fit.f_statistic >= 0.0);
      CHECK(fit.p_value >= 0.0);
      CHECK(fit.p_value <= 1.0);
    }
  }

  TEST_CASE("f_survival matches closed forms") {
    // F(2, d2) has survival (1 + 2f/d2)^(-d2/2).
    for (double f : {0.1, 1.0, 3.7}) {
      for (double d2 : {5.0, 40.0}) {
        CHECK(f_survival(f, 2, d2) == doctest::Approx(std::pow(1 + 2 * f / d2, -d2 / 2)));
      }
    }
    CHECK(f_survival(0.0, 3, 10) == 1.0);
  }

  TEST_CASE("white-noise calibration (small sample)") {
    Rng rng(1234);
    int hits = 0;
    const int trials = 400;
    for (int i = 0; i < trials; ++i) {
      const auto r = noise_rec(2, 1024, rng);
      if (fit_var_pair(row(r, 0), row(r, 1), 1).p_value < 0.05) ++hits;
    }
    const double rate = static_cast<double>(hits) / trials;
    CHECK(rate > 0.02);
    CHECK(rate < 0.09);
  }

  TEST_CASE("planted coupling is detected") {
    Rng rng(77);
    int hits = 0;
    for (int i = 0; i < 100; ++i) {
      const auto r = planted_pair(0.8, 1024, rng);
      if (fit_var_pair(row(r, 1), row(r, 0), 1).p_value < 0.05) ++hits;
    }
    CHECK(hits >= 99);
  }

  TEST_CASE("select_lag") {
    Rng rng(4);
    int ones = 0;
    for (int i = 0; i < 100; ++i) {
      const auto r = planted_pair(0.8, 1024, rng);
      const int lag = select_lag(row(r, 1), row(r, 0), 8);
      CHECK(lag >= 1);
      CHECK(lag <= 8);
      if (lag == 1) ++ones;
      CHECK(select_lag(row(r, 1), row(r, 0), 1) == 1);
    }
    CHECK(ones > 50);
    const auto noise = noise_rec(2, 256, rng);
    const int lag = select_lag(row(noise, 0), row(noise, 1), 5);
    CHECK(lag >= 1);
    CHECK(lag <= 5);
  }

  TEST_CASE("granger_matrix orientation and metadata") {
    Rng rng(99);
    int correct = 0;
    for (int i = 0; i < 40; ++i) {
      const auto m = granger_matrix(planted_pair(0.8, 1024, rng));
      CHECK(m.directed);
      REQUIRE(m.alpha.has_value());
      CHECK(*m.alpha == 0.05);
      CHECK(m.values(0, 0) == 0.0);
      CHECK(m.values(1, 1) == 0.0);
      if (m.values(1, 0) == 1.0 && m.values(0, 1) == 0.0) ++correct;
    }
    CHECK(correct >= 34);
  }

  TEST_CASE("granger density on independent noise is near alpha") {
    Rng rng(2024);
    double ones = 0, cells = 0;
    for (int i = 0; i < 5; ++i) {
      const auto m = granger_matrix(noise_rec(16, 512, rng), 0.05, FixedLag{1});
      for (int a = 0; a < 16; ++a) {
        for (int b = 0; b < 16; ++b) {
          if (a == b) continue;
          const double v = m.values(a, b);
          CHECK((v == 0.0 || v == 1.0));
          ones += v;
          cells += 1;
        }
      }
    }
    CHECK(ones / cells > 0.025);
    CHECK(ones / cells < 0.08);
  }

  TEST_CASE("granger threshold is strict") {
    Rng rng(6);
    const auto r = noise_rec(3, 200, rng);
    const auto fit = fit_var_pair(row(r, 0), row(r, 1), 1);
    // alpha equal to the observed p: not significant; just above: significant.
    const auto at = granger_matrix(r, fit.p_value, FixedLag{1});
    CHECK(at.values(0, 1) == 0.0);
    const auto above = granger_matrix(r, std::nextafter(fit.p_value, 1.0), FixedLag{1});
    CHECK(above.values(0, 1) == 1.0);
  }

  TEST_CASE("granger result does not depend on jobs") {
    Rng rng(12);
    const auto r = noise_rec(6, 300, rng);
    CHECK(granger_matrix(r, 0.05, BicLag{4}, 1).values ==
          granger_matrix(r, 0.05, BicLag{4}, 3).values);
  }

  TEST_CASE("granger errors name the pair") {
    auto r = from_rows({{1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 0}});
    try {
      granger_matrix(r, 0.05, FixedLag{1});
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("c1") != std::string::npos);
    }
  }

  TEST_CASE("connectivity CSV round trip") {
    Rng rng(14);
    const auto r = noise_rec(4, 100, rng);
    const auto dir = std::filesystem::temp_directory_path() / "fcnet_unit_conn";
    std::filesystem::create_directories(dir);
    const auto m = granger_matrix(r, 0.05, FixedLag{2});
    write_connectivity(m, dir / "g.csv");
    const auto back = read_connectivity(dir / "g.csv");
    CHECK(back.values == m.values);
    CHECK(back.method == ConnectivityMethod::granger);
    CHECK(back.alpha == m.alpha);
    const auto p = pearson_matrix(r);
    write_connectivity(p, dir / "p.csv");
    CHECK(read_connectivity(dir / "p.csv").values == p.values);
  }
}
