#include "fcnet/error.hpp"
#include "fcnet/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace fcnet;
using namespace fcnet::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> g;
  for (auto& v : t.values) v = g(rng);
  return t;
}

// Small model touching every layer kind, including padded conv and
// same-padded pooling.
ModelSpec small_spec(Activation act, Loss loss) {
  ModelSpec s;
  s.input_shape = {8, 8, 1};
  s.layers = {LayerSpec::conv2d(3, 3, 0, act),
              LayerSpec::maxpool2d(2, 2),
              LayerSpec::dropout(0.3),
              LayerSpec::conv2d(4, 2, 1, act),
              LayerSpec::maxpool2d(2, 1, PoolPadding::same),
              LayerSpec::flatten(),
              LayerSpec::dense(5, act),
              LayerSpec::dropout(0.2)};
  if (loss == Loss::categorical_cross_entropy) {
    s.layers.push_back(LayerSpec::dense(2, Activation::softmax));
  } else {
    s.layers.push_back(LayerSpec::dense(1, Activation::sigmoid));
  }
  s.loss = loss;
  return s;
}

double max_fd_error(const ModelSpec& spec, std::uint64_t seed) {
  Model model = init_model(spec, seed);
  Rng data_rng(seed + 100);
  std::vector<Tensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 3; ++i) {
    xs.push_back(random_tensor({8, 8, 1}, data_rng));
    ys.push_back(i % 2);
  }
  std::vector<double> grads;
  Rng r0(seed + 7);
  backward(model, xs, ys, grads, true, &r0);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < model.parameters.size(); ++p) {
    const double saved = model.parameters[p];
    model.parameters[p] = saved + h;
    Rng r1(seed + 7);
    const double up = batch_loss(model, xs, ys, true, &r1);
    model.parameters[p] = saved - h;
    Rng r2(seed + 7);
    const double down = batch_loss(model, xs, ys, true, &r2);
    model.parameters[p] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grads[p]), 1e-4});
    worst = std::max(worst, std::abs(numeric - grads[p]) / denom);
  }
  return worst;
}

Dataset toy_set(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d;
  for (int i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    const int y = a + b > 0 ? 1 : 0;
    const double shift = y ? 0.3 : -0.3;
    d.inputs.push_back(Tensor({1, 1, 2}, {a + shift, b + shift}));
    d.labels.push_back(y);
  }
  return d;
}

ModelSpec toy_spec() {
  ModelSpec s;
  s.input_shape = {1, 1, 2};
  s.layers = {LayerSpec::flatten(), LayerSpec::dense(8, Activation::tanh),
              LayerSpec::dense(2, Activation::softmax)};
  return s;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("tuned spec on 19x19 matches the reference table") {
    const auto spec = build_tuned_spec(19, HyperParams{});
    const auto shapes = infer_shapes(spec);
    const std::vector<Shape> expected = {{17, 17, 16}, {15, 15, 16}, {7, 7, 16}, {7, 7, 16},
                                         {5, 5, 32},   {3, 3, 32},   {1, 1, 32}, {1, 1, 32},
                                         {32},         {160},        {160},      {2}};
    CHECK(shapes == expected);
    const std::vector<std::size_t> counts = {160, 2320, 0, 0, 4640, 9248, 0, 0, 0, 5280, 0, 322};
    for (std::size_t i = 0; i < counts.size(); ++i) {
      CHECK(layer_param_count(spec, i) == counts[i]);
    }
    CHECK(param_count(spec) == 160 + 2320 + 4640 + 9248 + 5280 + 322);
  }

  TEST_CASE("tuned spec on 16x16") {
    const auto shapes = infer_shapes(build_tuned_spec(16, HyperParams{}));
    CHECK(shapes[0] == Shape{14, 14, 16});
    CHECK(shapes[1] == Shape{12, 12, 16});
    CHECK(shapes[2] == Shape{6, 6, 16});
    CHECK(shapes[4] == Shape{4, 4, 32});
    CHECK(shapes[5] == Shape{2, 2, 32});
    CHECK(shapes[6] == Shape{1, 1, 32});
    CHECK(shapes[8] == Shape{32});
  }

  TEST_CASE("tuned spec rejects inputs that are too small") {
    CHECK_THROWS_AS(infer_shapes(build_tuned_spec(12, HyperParams{})), UsageError);
    CHECK_THROWS_AS(infer_shapes(build_tuned_spec(15, HyperParams{})), UsageError);
  }

  TEST_CASE("untuned spec") {
    const auto s19 = build_untuned_spec(19);
    const auto sh19 = infer_shapes(s19);
    CHECK(sh19[0] == Shape{18, 18, 32});
    CHECK(sh19[1] == Shape{18, 18, 32});
    CHECK(sh19[2] == Shape{17, 17, 16});
    CHECK(sh19[3] == Shape{17, 17, 16});
    CHECK(sh19[4] == Shape{4624});
    const auto sh16 = infer_shapes(build_untuned_spec(16));
    CHECK(sh16[4] == Shape{3136});
    CHECK(sh19[5] == Shape{10});
    CHECK(sh19[6] == Shape{1});
    CHECK(s19.layers.back().activation == Activation::sigmoid);
    CHECK(s19.loss == Loss::binary_cross_entropy);
  }

  TEST_CASE("infer_shapes rejects a head that does not match the loss") {
    auto s = toy_spec();
    s.loss = Loss::binary_cross_entropy;
    CHECK_THROWS_AS(infer_shapes(s), UsageError);
  }

  TEST_CASE("conv2d_forward") {
    Rng rng(1);
    const auto x19 = random_tensor({19, 19, 1}, rng);
    const auto k = random_tensor({3, 3, 1, 16}, rng);
    CHECK(conv2d_forward(x19, k, Tensor({16}), 0).shape == Shape{17, 17, 16});
    const auto x16 = random_tensor({16, 16, 1}, rng);
    CHECK(conv2d_forward(x16, k, Tensor({16}), 0).shape == Shape{14, 14, 16});
    const Tensor one({1, 1, 1}, {2.5});
    CHECK(conv2d_forward(one, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}), 0).values ==
          one.values);
  }

  TEST_CASE("conv2d_forward matches direct summation") {
    Rng rng(2);
    const auto x = random_tensor({5, 6, 2}, rng);
    const auto k = random_tensor({3, 3, 2, 4}, rng);
    const auto b = random_tensor({4}, rng);
    const auto y = conv2d_forward(x, k, b, 1);
    REQUIRE(y.shape == Shape{5, 6, 4});
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 6; ++j) {
        for (int f = 0; f < 4; ++f) {
          double s = b[static_cast<std::size_t>(f)];
          for (int di = 0; di < 3; ++di) {
            for (int dj = 0; dj < 3; ++dj) {
              const int ii = i + di - 1, jj = j + dj - 1;
              if (ii < 0 || jj < 0 || ii >= 5 || jj >= 6) continue;
              for (int c = 0; c < 2; ++c) {
                s += x[static_cast<std::size_t>((ii * 6 + jj) * 2 + c)] *
                     k[static_cast<std::size_t>(((di * 3 + dj) * 2 + c) * 4 + f)];
              }
            }
          }
          CHECK(y[static_cast<std::size_t>((i * 6 + j) * 4 + f)] == doctest::Approx(s));
        }
      }
    }
  }

  TEST_CASE("maxpool2d_forward") {
    Tensor x({4, 4, 1});
    for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i + 1);
    const auto y = maxpool2d_forward(x, 2, 2);
    CHECK(y.shape == Shape{2, 2, 1});
    CHECK(y.values == std::vector<double>{6, 8, 14, 16});

    Rng rng(3);
    CHECK(maxpool2d_forward(random_tensor({7, 7, 16}, rng), 2, 2).shape == Shape{3, 3, 16});
    CHECK(maxpool2d_forward(random_tensor({15, 15, 16}, rng), 2, 2).shape == Shape{7, 7, 16});
    const Tensor c({6, 6, 2}, 4.25);
    const auto pc = maxpool2d_forward(c, 2, 2);
    for (double v : pc.values) CHECK(v == 4.25);
  }

  TEST_CASE("dropout_apply") {
    Rng rng(4);
    const auto x = random_tensor({1000}, rng);
    CHECK(dropout_apply(x, 0.0, true, rng).values == x.values);
    CHECK(dropout_apply(x, 0.7, false, rng).values == x.values);

    const Tensor ones({100000}, 1.0);
    const auto y = dropout_apply(ones, 0.5, true, rng);
    std::size_t zeros = 0;
    for (double v : y.values) {
      if (v == 0.0) ++zeros;
      else CHECK(v == 2.0);
    }
    CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.5) < 0.01);
  }

  TEST_CASE("dense_forward") {
    const Tensor x({3}, {1.0, -2.0, 0.5});
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    CHECK(dense_forward(x, eye, Tensor({3}), Activation::linear).values == x.values);
    const auto sm = dense_forward(Tensor({1}, {0.0}), Tensor({1, 2}), Tensor({2}),
                                  Activation::softmax);
    CHECK(sm.values == std::vector<double>{0.5, 0.5});
    auto spec = build_tuned_spec(19, HyperParams{});
    CHECK(layer_param_count(spec, 9) == 32 * 160 + 160);
  }

  TEST_CASE("zero final layer gives ln 2 loss on a balanced batch") {
    const auto spec = build_tuned_spec(16, HyperParams{});
    Model m = init_model(spec, 5);
    const std::size_t last = spec.layers.size() - 1;
    for (auto& w : m.weights(last)) w = 0.0;
    for (auto& b : m.bias(last)) b = 0.0;
    Rng rng(1);
    std::vector<Tensor> xs{random_tensor({16, 16, 1}, rng), random_tensor({16, 16, 1}, rng)};
    std::vector<int> ys{0, 1};
    std::vector<double> g;
    CHECK(backward(m, xs, ys, g, false) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("finite-difference gradient check") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Activation act = seed % 2 ? Activation::tanh : Activation::relu;
      const Loss loss = seed < 2 ? Loss::categorical_cross_entropy : Loss::binary_cross_entropy;
      CAPTURE(seed);
      CHECK(max_fd_error(small_spec(act, loss), seed) < 1e-6);
    }
  }

  TEST_CASE("duplicating the batch leaves gradients unchanged") {
    const auto spec = small_spec(Activation::tanh, Loss::categorical_cross_entropy);
    const Model m = init_model(spec, 3);
    Rng rng(9);
    std::vector<Tensor> xs{random_tensor({8, 8, 1}, rng), random_tensor({8, 8, 1}, rng)};
    std::vector<int> ys{1, 0};
    auto xs2 = xs;
    xs2.insert(xs2.end(), xs.begin(), xs.end());
    auto ys2 = ys;
    ys2.insert(ys2.end(), ys.begin(), ys.end());
    std::vector<double> g1, g2;
    const double l1 = backward(m, xs, ys, g1, false);
    const double l2 = backward(m, xs2, ys2, g2, false);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
    for (std::size_t i = 0; i < g1.size(); ++i) {
      CHECK(std::abs(g1[i] - g2[i]) <= 1e-14 * (1 + std::abs(g1[i])));
    }
  }

  TEST_CASE("adam_step") {
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<double> p{1.0, -2.0, 0.5}, g{0.3, -4.0, 1e-3}, m(3), v(3);
    const auto before = p;
    adam_step(p, g, m, v, 1, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      const double sign = g[i] > 0 ? 1.0 : -1.0;
      CHECK(before[i] - p[i] == doctest::Approx(cfg.learning_rate * sign).epsilon(1e-4));
    }

    std::vector<double> q{1.0, 2.0}, zero(2), mq(2), vq(2);
    for (long t = 1; t <= 50; ++t) adam_step(q, zero, mq, vq, t, cfg);
    CHECK(q == std::vector<double>{1.0, 2.0});

    std::vector<double> w{1.0}, gw(1), mw(1), vw(1);
    for (long t = 1; t <= 100; ++t) {
      gw[0] = 2 * w[0];
      adam_step(w, gw, mw, vw, t, cfg);
    }
    CHECK(std::abs(w[0]) < 1.0);
  }

  TEST_CASE("toy training separates linearly separable data") {
    const auto data = toy_set(64, 1);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 200;
    cfg.early_stop_patience.reset();
    cfg.seed = 3;
    const auto result = train(toy_spec(), data, nullptr, cfg);
    CHECK(accuracy(result.model, data) == 1.0);
  }

  TEST_CASE("training is deterministic per seed") {
    TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.seed = 11;
    const auto spec = small_spec(Activation::relu, Loss::categorical_cross_entropy);
    Dataset images;
    Rng rng(5);
    for (int i = 0; i < 16; ++i) {
      images.inputs.push_back(random_tensor({8, 8, 1}, rng));
      images.labels.push_back(i % 2);
    }
    const auto a = train(spec, images, &images, cfg);
    const auto b = train(spec, images, &images, cfg);
    CHECK(a.model.parameters == b.model.parameters);
    cfg.seed = 12;
    const auto c = train(spec, images, &images, cfg);
    CHECK(a.model.parameters != c.model.parameters);
  }

  TEST_CASE("small learning rate decreases toy loss early on") {
    const auto data = toy_set(64, 4);
    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.max_epochs = 10;
    cfg.early_stop_patience.reset();
    cfg.seed = 1;
    const auto r = train(toy_spec(), data, nullptr, cfg);
    REQUIRE(r.history.size() == 10);
    for (std::size_t e = 1; e < r.history.size(); ++e) {
      CHECK(r.history[e].train_loss <= r.history[e - 1].train_loss + 1e-3);
    }
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
  }

  TEST_CASE("early stopping restores the best validation weights") {
    const auto data = toy_set(40, 5);
    const auto val = toy_set(20, 6);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 60;
    cfg.early_stop_patience = 3;
    cfg.seed = 2;
    const auto r = train(toy_spec(), data, &val, cfg);
    double best = 1e300;
    for (const auto& e : r.history) best = std::min(best, *e.val_loss);
    std::vector<int> labels = val.labels;
    CHECK(batch_loss(r.model, val.inputs, labels, false) == doctest::Approx(best));
  }

  TEST_CASE("checkpoint round trip") {
    const auto spec = build_tuned_spec(16, HyperParams{});
    const Model m = init_model(spec, 42);
    const auto path = std::filesystem::temp_directory_path() / "fcnet_ckpt.json";
    save_checkpoint(m, path);
    const Model back = load_checkpoint(path);
    CHECK(back.parameters == m.parameters);
    CHECK(back.spec == m.spec);
  }
}
