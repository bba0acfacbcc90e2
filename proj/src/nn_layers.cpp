#include "fcnet/error.hpp"
#include "fcnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fcnet {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softmax") return Activation::softmax;
  if (name == "linear") return Activation::linear;
  throw UsageError("unknown activation '" + name + "'");
}

}  // namespace fcnet

namespace fcnet::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size()) {
    throw UsageError("tensor of shape " + shape_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
  }
  return "unknown";
}

std::string to_string(Loss loss) {
  return loss == Loss::categorical_cross_entropy ? "categorical_cross_entropy"
                                                 : "binary_cross_entropy";
}

LayerSpec LayerSpec::conv2d(int filters, int kernel_size, int padding,
                            Activation activation) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.filters = filters;
  l.kernel_size = kernel_size;
  l.padding = padding;
  l.activation = activation;
  return l;
}

LayerSpec LayerSpec::maxpool2d(int pool_size, int stride, PoolPadding padding) {
  LayerSpec l;
  l.kind = LayerKind::maxpool2d;
  l.pool_size = pool_size;
  l.stride = stride;
  l.pool_padding = padding;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

LayerSpec LayerSpec::dense(int units, Activation activation) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  l.activation = activation;
  return l;
}

namespace {

[[noreturn]] void shape_error(std::size_t layer, const LayerSpec& spec,
                              const Shape& in, const std::string& why) {
  throw UsageError("layer " + std::to_string(layer) + " (" + to_string(spec.kind) +
                   ") cannot take input " + shape_string(in) + ": " + why);
}

struct PoolGeometry {
  std::size_t out_h, out_w, pad_top, pad_left;
};

PoolGeometry pool_geometry(std::size_t h, std::size_t w, int pool, int stride,
                           PoolPadding padding) {
  const auto p = static_cast<std::size_t>(pool);
  const auto s = static_cast<std::size_t>(stride);
  if (padding == PoolPadding::valid) {
    return {(h - p) / s + 1, (w - p) / s + 1, 0, 0};
  }
  const std::size_t oh = (h + s - 1) / s;
  const std::size_t ow = (w + s - 1) / s;
  const auto total = [&](std::size_t out, std::size_t dim) {
    const std::size_t need = (out - 1) * s + p;
    return need > dim ? need - dim : 0;
  };
  return {oh, ow, total(oh, h) / 2, total(ow, w) / 2};
}

}  // namespace

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  const auto [H, W, C] = spec.input_shape;
  if (H < 1 || W < 1 || C < 1) throw UsageError("input shape must be positive");
  if (spec.layers.empty()) throw UsageError("model has no layers");
  Shape cur{static_cast<std::size_t>(H), static_cast<std::size_t>(W),
            static_cast<std::size_t>(C)};
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const bool last = i + 1 == spec.layers.size();
    switch (l.kind) {
      case LayerKind::conv2d: {
        if (cur.size() != 3) shape_error(i, l, cur, "expects [H, W, C]");
        if (l.filters < 1 || l.kernel_size < 1 || l.padding < 0) {
          shape_error(i, l, cur, "filters and kernel size must be positive");
        }
        if (l.activation == Activation::softmax) {
          shape_error(i, l, cur, "softmax is only valid on the output layer");
        }
        const auto k = static_cast<std::size_t>(l.kernel_size);
        const auto pad = static_cast<std::size_t>(2 * l.padding);
        if (cur[0] + pad < k || cur[1] + pad < k) {
          shape_error(i, l, cur, "kernel larger than padded input");
        }
        cur = {cur[0] + pad - k + 1, cur[1] + pad - k + 1,
               static_cast<std::size_t>(l.filters)};
        break;
      }
      case LayerKind::maxpool2d: {
        if (cur.size() != 3) shape_error(i, l, cur, "expects [H, W, C]");
        if (l.pool_size < 1 || l.stride < 1) {
          shape_error(i, l, cur, "pool size and stride must be positive");
        }
        const auto p = static_cast<std::size_t>(l.pool_size);
        if (l.pool_padding == PoolPadding::valid && (p > cur[0] || p > cur[1])) {
          shape_error(i, l, cur, "pool window larger than input");
        }
        const auto g = pool_geometry(cur[0], cur[1], l.pool_size, l.stride, l.pool_padding);
        cur = {g.out_h, g.out_w, cur[2]};
        break;
      }
      case LayerKind::dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) shape_error(i, l, cur, "rate outside [0, 1)");
        break;
      case LayerKind::flatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::dense:
        if (cur.size() != 1) shape_error(i, l, cur, "expects a flat input");
        if (l.units < 1) shape_error(i, l, cur, "units must be positive");
        if (l.activation == Activation::softmax && !last) {
          shape_error(i, l, cur, "softmax is only valid on the output layer");
        }
        cur = {static_cast<std::size_t>(l.units)};
        break;
    }
    shapes.push_back(cur);
  }
  const auto& head = spec.layers.back();
  if (head.kind != LayerKind::dense) throw UsageError("output layer must be dense");
  if (spec.loss == Loss::categorical_cross_entropy &&
      !(head.units == 2 && head.activation == Activation::softmax)) {
    throw UsageError("categorical cross-entropy needs a 2-unit softmax output");
  }
  if (spec.loss == Loss::binary_cross_entropy &&
      !(head.units == 1 && head.activation == Activation::sigmoid)) {
    throw UsageError("binary cross-entropy needs a 1-unit sigmoid output");
  }
  return shapes;
}

std::size_t layer_param_count(const ModelSpec& spec, std::size_t layer) {
  const auto shapes = infer_shapes(spec);
  const auto& l = spec.layers.at(layer);
  const std::size_t in_c =
      layer == 0 ? static_cast<std::size_t>(spec.input_shape[2]) : shapes[layer - 1].back();
  const std::size_t in_size =
      layer == 0 ? static_cast<std::size_t>(spec.input_shape[0] * spec.input_shape[1] *
                                            spec.input_shape[2])
                 : shape_size(shapes[layer - 1]);
  switch (l.kind) {
    case LayerKind::conv2d: {
      const auto k = static_cast<std::size_t>(l.kernel_size);
      const auto f = static_cast<std::size_t>(l.filters);
      return k * k * in_c * f + f;
    }
    case LayerKind::dense: {
      const auto u = static_cast<std::size_t>(l.units);
      return in_size * u + u;
    }
    default:
      return 0;
  }
}

std::size_t param_count(const ModelSpec& spec) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) total += layer_param_count(spec, i);
  return total;
}

ModelSpec build_tuned_spec(int input_h, int input_w, const HyperParams& hp) {
  ModelSpec spec;
  spec.input_shape = {input_h, input_w, 1};
  spec.loss = Loss::categorical_cross_entropy;
  spec.layers = {
      LayerSpec::conv2d(16, 3),
      LayerSpec::conv2d(16, 3),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::dropout(hp.dropout_a),
      LayerSpec::conv2d(32, 3),
      LayerSpec::conv2d(32, 3),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::dropout(hp.dropout_b),
      LayerSpec::flatten(),
      LayerSpec::dense(hp.dense_units, hp.activation),
      LayerSpec::dropout(hp.dropout_c),
      LayerSpec::dense(2, Activation::softmax),
  };
  infer_shapes(spec);
  return spec;
}

ModelSpec build_untuned_spec(int input_h, int input_w) {
  if (input_h < 4 || input_w < 4) {
    throw UsageError("untuned network needs inputs of at least 4x4");
  }
  ModelSpec spec;
  spec.input_shape = {input_h, input_w, 1};
  spec.loss = Loss::binary_cross_entropy;
  spec.layers = {
      LayerSpec::conv2d(32, 2),
      LayerSpec::maxpool2d(2, 1, PoolPadding::same),
      LayerSpec::conv2d(16, 2),
      LayerSpec::maxpool2d(2, 1, PoolPadding::same),
      LayerSpec::flatten(),
      LayerSpec::dense(10, Activation::relu),
      LayerSpec::dense(1, Activation::sigmoid),
  };
  infer_shapes(spec);
  return spec;
}

std::span<double> Model::weights(std::size_t layer) {
  const auto& s = slots.at(layer);
  return {parameters.data() + s.weight_offset, s.weight_size};
}
std::span<const double> Model::weights(std::size_t layer) const {
  const auto& s = slots.at(layer);
  return {parameters.data() + s.weight_offset, s.weight_size};
}
std::span<double> Model::bias(std::size_t layer) {
  const auto& s = slots.at(layer);
  return {parameters.data() + s.bias_offset, s.bias_size};
}
std::span<const double> Model::bias(std::size_t layer) const {
  const auto& s = slots.at(layer);
  return {parameters.data() + s.bias_offset, s.bias_size};
}

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  Model model;
  model.spec = spec;
  model.shapes = infer_shapes(spec);
  model.rng_seed = seed;
  model.slots.resize(spec.layers.size());

  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Shape in = i == 0 ? Shape{static_cast<std::size_t>(spec.input_shape[0]),
                                    static_cast<std::size_t>(spec.input_shape[1]),
                                    static_cast<std::size_t>(spec.input_shape[2])}
                            : model.shapes[i - 1];
    auto& slot = model.slots[i];
    if (l.kind == LayerKind::conv2d) {
      const auto k = static_cast<std::size_t>(l.kernel_size);
      slot.weight_size = k * k * in[2] * static_cast<std::size_t>(l.filters);
      slot.bias_size = static_cast<std::size_t>(l.filters);
    } else if (l.kind == LayerKind::dense) {
      slot.weight_size = shape_size(in) * static_cast<std::size_t>(l.units);
      slot.bias_size = static_cast<std::size_t>(l.units);
    }
    slot.weight_offset = offset;
    slot.bias_offset = offset + slot.weight_size;
    offset += slot.weight_size + slot.bias_size;
  }
  model.parameters.assign(offset, 0.0);

  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    double fan_in = 0.0, fan_out = 0.0;
    if (l.kind == LayerKind::conv2d) {
      const double kk = static_cast<double>(l.kernel_size * l.kernel_size);
      fan_in = static_cast<double>(model.slots[i].weight_size) / l.filters;  // k*k*C
      fan_out = kk * static_cast<double>(l.filters);
    } else if (l.kind == LayerKind::dense) {
      fan_in = static_cast<double>(model.slots[i].weight_size) / l.units;
      fan_out = static_cast<double>(l.units);
    } else {
      continue;
    }
    const double limit = l.activation == Activation::relu
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : model.weights(i)) w = dist(rng);
  }
  return model;
}

// ---- kernels ---------------------------------------------------------------

namespace {

struct ConvDims {
  std::size_t h, w, c, k, f, pad, oh, ow;
};

void conv_forward_raw(const double* in, const double* kernels, const double* bias,
                      const ConvDims& d, double* out) {
  for (std::size_t y = 0; y < d.oh; ++y) {
    for (std::size_t x = 0; x < d.ow; ++x) {
      double* o = out + (y * d.ow + x) * d.f;
      std::copy(bias, bias + d.f, o);
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                  static_cast<std::ptrdiff_t>(d.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                    static_cast<std::ptrdiff_t>(d.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
          const double* ip = in + (static_cast<std::size_t>(iy) * d.w +
                                   static_cast<std::size_t>(ix)) * d.c;
          const double* kp = kernels + (ky * d.k + kx) * d.c * d.f;
          for (std::size_t c = 0; c < d.c; ++c) {
            const double v = ip[c];
            const double* kc = kp + c * d.f;
            for (std::size_t f = 0; f < d.f; ++f) o[f] += v * kc[f];
          }
        }
      }
    }
  }
}

void conv_backward_raw(const double* in, const double* kernels, const double* dz,
                       const ConvDims& d, double* din, double* dk, double* db) {
  for (std::size_t y = 0; y < d.oh; ++y) {
    for (std::size_t x = 0; x < d.ow; ++x) {
      const double* g = dz + (y * d.ow + x) * d.f;
      for (std::size_t f = 0; f < d.f; ++f) db[f] += g[f];
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                  static_cast<std::ptrdiff_t>(d.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                    static_cast<std::ptrdiff_t>(d.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
          const std::size_t in_off =
              (static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)) * d.c;
          const double* ip = in + in_off;
          double* dip = din ? din + in_off : nullptr;
          const std::size_t k_off = (ky * d.k + kx) * d.c * d.f;
          for (std::size_t c = 0; c < d.c; ++c) {
            const double v = ip[c];
            const double* kc = kernels + k_off + c * d.f;
            double* dkc = dk + k_off + c * d.f;
            double acc = 0.0;
            for (std::size_t f = 0; f < d.f; ++f) {
              dkc[f] += v * g[f];
              acc += kc[f] * g[f];
            }
            if (dip) dip[c] += acc;
          }
        }
      }
    }
  }
}

void maxpool_forward_raw(const double* in, std::size_t h, std::size_t w, std::size_t c,
                         int pool, int stride, PoolPadding padding, double* out,
                         std::size_t* argmax) {
  const auto g = pool_geometry(h, w, pool, stride, padding);
  const auto p = static_cast<std::size_t>(pool);
  const auto s = static_cast<std::size_t>(stride);
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t py = 0; py < p; ++py) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + py) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t px = 0; px < p; ++px) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + px) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t idx =
                (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c + ch;
            if (in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (oy * g.out_w + ox) * c + ch;
        out[o] = best;
        if (argmax) argmax[o] = best_idx;
      }
    }
  }
}

void dense_forward_raw(std::span<const double> x, const double* weights,
                       const double* bias, std::size_t units, double* out) {
  std::copy(bias, bias + units, out);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v == 0.0) continue;
    const double* wr = weights + i * units;
    for (std::size_t j = 0; j < units; ++j) out[j] += v * wr[j];
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void activate(Activation a, std::span<double> v) {
  switch (a) {
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::tanh:
      for (double& x : v) x = std::tanh(x);
      break;
    case Activation::sigmoid:
      for (double& x : v) x = sigmoid(x);
      break;
    case Activation::softmax: {
      const double mx = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
      }
      for (double& x : v) x /= sum;
      break;
    }
    case Activation::linear:
      break;
  }
}

// g <- g * activation'(z), expressed through the activation output.
void activation_grad(Activation a, std::span<const double> out, std::span<double> g) {
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(out[i] > 0.0)) g[i] = 0.0;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= out[i] * (1.0 - out[i]);
      break;
    case Activation::linear:
      break;
    case Activation::softmax:
      throw UsageError("softmax gradient is only defined fused with the loss");
  }
}

ConvDims conv_dims(const Shape& in, const LayerSpec& l) {
  ConvDims d{};
  d.h = in[0];
  d.w = in[1];
  d.c = in[2];
  d.k = static_cast<std::size_t>(l.kernel_size);
  d.f = static_cast<std::size_t>(l.filters);
  d.pad = static_cast<std::size_t>(l.padding);
  d.oh = d.h + 2 * d.pad - d.k + 1;
  d.ow = d.w + 2 * d.pad - d.k + 1;
  return d;
}

Shape input_shape_of(const Model& model, std::size_t layer) {
  if (layer == 0) {
    const auto& s = model.spec.input_shape;
    return {static_cast<std::size_t>(s[0]), static_cast<std::size_t>(s[1]),
            static_cast<std::size_t>(s[2])};
  }
  return model.shapes[layer - 1];
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int padding) {
  if (input.shape.size() != 3 || kernels.shape.size() != 4 || bias.shape.size() != 1) {
    throw UsageError("conv2d_forward expects input [H,W,C], kernels [k,k,C,F], bias [F]");
  }
  if (kernels.shape[0] != kernels.shape[1] || kernels.shape[2] != input.shape[2] ||
      kernels.shape[3] != bias.shape[0] || padding < 0) {
    throw UsageError("conv2d_forward shape mismatch");
  }
  ConvDims d{};
  d.h = input.shape[0];
  d.w = input.shape[1];
  d.c = input.shape[2];
  d.k = kernels.shape[0];
  d.f = kernels.shape[3];
  d.pad = static_cast<std::size_t>(padding);
  if (d.h + 2 * d.pad < d.k || d.w + 2 * d.pad < d.k) {
    throw UsageError("kernel larger than padded input");
  }
  d.oh = d.h + 2 * d.pad - d.k + 1;
  d.ow = d.w + 2 * d.pad - d.k + 1;
  Tensor out({d.oh, d.ow, d.f});
  conv_forward_raw(input.values.data(), kernels.values.data(), bias.values.data(), d,
                   out.values.data());
  return out;
}

Tensor maxpool2d_forward(const Tensor& input, int pool_size, int stride) {
  if (input.shape.size() != 3) throw UsageError("maxpool2d_forward expects [H,W,C]");
  if (pool_size < 1 || stride < 1) throw UsageError("pool size and stride must be positive");
  const auto p = static_cast<std::size_t>(pool_size);
  if (p > input.shape[0] || p > input.shape[1]) {
    throw UsageError("pool window larger than input");
  }
  const auto g = pool_geometry(input.shape[0], input.shape[1], pool_size, stride,
                               PoolPadding::valid);
  Tensor out({g.out_h, g.out_w, input.shape[2]});
  maxpool_forward_raw(input.values.data(), input.shape[0], input.shape[1],
                      input.shape[2], pool_size, stride, PoolPadding::valid,
                      out.values.data(), nullptr);
  return out;
}

Tensor dropout_apply(const Tensor& input, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate outside [0, 1)");
  if (!training || rate == 0.0) return input;
  Tensor out = input;
  std::bernoulli_distribution drop(rate);
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : out.values) v = drop(rng) ? 0.0 : v * scale;
  return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation activation) {
  if (weights.shape.size() != 2 || bias.shape.size() != 1 ||
      weights.shape[0] != input.size() || weights.shape[1] != bias.shape[0]) {
    throw UsageError("dense_forward shape mismatch");
  }
  Tensor out({bias.shape[0]});
  dense_forward_raw(input.values, weights.values.data(), bias.values.data(),
                    bias.shape[0], out.values.data());
  activate(activation, out.values);
  return out;
}

ForwardTrace forward(const Model& model, const Tensor& input, bool training, Rng* rng) {
  const auto& spec = model.spec;
  const Shape in_shape = input_shape_of(model, 0);
  if (input.size() != shape_size(in_shape)) {
    throw UsageError("model input expects " + shape_string(in_shape) + ", got " +
                     shape_string(input.shape));
  }
  ForwardTrace trace;
  const std::size_t n = spec.layers.size();
  trace.outputs.resize(n + 1);
  trace.masks.resize(n);
  trace.argmax.resize(n);
  trace.outputs[0] = Tensor(in_shape, input.values);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = spec.layers[i];
    const Tensor& x = trace.outputs[i];
    Tensor y(model.shapes[i]);
    switch (l.kind) {
      case LayerKind::conv2d: {
        const auto d = conv_dims(x.shape, l);
        conv_forward_raw(x.values.data(), model.weights(i).data(), model.bias(i).data(),
                         d, y.values.data());
        activate(l.activation, y.values);
        break;
      }
      case LayerKind::maxpool2d:
        trace.argmax[i].resize(y.size());
        maxpool_forward_raw(x.values.data(), x.shape[0], x.shape[1], x.shape[2],
                            l.pool_size, l.stride, l.pool_padding, y.values.data(),
                            trace.argmax[i].data());
        break;
      case LayerKind::dropout:
        if (training && l.rate > 0.0) {
          if (!rng) throw UsageError("training-mode dropout needs an rng");
          std::bernoulli_distribution drop(l.rate);
          const double scale = 1.0 / (1.0 - l.rate);
          auto& mask = trace.masks[i];
          mask.resize(x.size());
          for (std::size_t k = 0; k < x.size(); ++k) {
            mask[k] = drop(*rng) ? 0.0 : scale;
            y.values[k] = x.values[k] * mask[k];
          }
        } else {
          y.values = x.values;
        }
        break;
      case LayerKind::flatten:
        y.values = x.values;
        break;
      case LayerKind::dense:
        dense_forward_raw(x.values, model.weights(i).data(), model.bias(i).data(),
                          static_cast<std::size_t>(l.units), y.values.data());
        if (i + 1 == n) trace.logits = y.values;
        activate(l.activation, y.values);
        break;
    }
    trace.outputs[i + 1] = std::move(y);
  }
  return trace;
}

double example_loss(Loss loss, std::span<const double> logits, int label) {
  if (label != 0 && label != 1) throw UsageError("labels must be 0 or 1");
  if (loss == Loss::categorical_cross_entropy) {
    const double mx = std::max(logits[0], logits[1]);
    const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
    return lse - logits[static_cast<std::size_t>(label)];
  }
  const double z = logits[0];
  return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
}

std::array<double, 2> predict_proba(const Model& model, const Tensor& input) {
  const auto trace = forward(model, input, false);
  const auto& out = trace.outputs.back().values;
  if (model.spec.loss == Loss::categorical_cross_entropy) return {out[0], out[1]};
  return {1.0 - out[0], out[0]};
}

double batch_loss(const Model& model, std::span<const Tensor> inputs,
                  std::span<const int> labels, bool training, Rng* rng) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw UsageError("batch must be nonempty with one label per input");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto trace = forward(model, inputs[b], training, rng);
    total += example_loss(model.spec.loss, trace.logits, labels[b]);
  }
  return total / static_cast<double>(inputs.size());
}

double backward(const Model& model, std::span<const Tensor> inputs,
                std::span<const int> labels, std::vector<double>& grads, bool training,
                Rng* rng, std::vector<double>* positive_prob) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw UsageError("batch must be nonempty with one label per input");
  }
  const auto& spec = model.spec;
  const std::size_t n = spec.layers.size();
  grads.assign(model.parameters.size(), 0.0);
  if (positive_prob) positive_prob->assign(inputs.size(), 0.0);
  double total = 0.0;

  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto trace = forward(model, inputs[b], training, rng);
    const int y = labels[b];
    total += example_loss(spec.loss, trace.logits, y);
    if (positive_prob) {
      const auto& head = trace.outputs[n].values;
      (*positive_prob)[b] = spec.loss == Loss::categorical_cross_entropy ? head[1] : head[0];
    }

    // Head: fused softmax/CE or sigmoid/BCE gives dL/dz = p - target.
    std::vector<double> g = trace.outputs[n].values;
    if (spec.loss == Loss::categorical_cross_entropy) {
      g[static_cast<std::size_t>(y)] -= 1.0;
    } else {
      g[0] -= y;
    }
    bool pre_activation = true;

    for (std::size_t li = n; li-- > 0;) {
      const auto& l = spec.layers[li];
      const Tensor& x = trace.outputs[li];
      const Tensor& out = trace.outputs[li + 1];
      const bool need_input_grad = li > 0;
      std::vector<double> gin;
      switch (l.kind) {
        case LayerKind::dense: {
          if (!pre_activation) activation_grad(l.activation, out.values, g);
          const std::size_t units = static_cast<std::size_t>(l.units);
          const double* w = model.weights(li).data();
          double* dw = grads.data() + model.slots[li].weight_offset;
          double* db = grads.data() + model.slots[li].bias_offset;
          for (std::size_t j = 0; j < units; ++j) db[j] += g[j];
          if (need_input_grad) gin.assign(x.size(), 0.0);
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x.values[i];
            double* dwr = dw + i * units;
            const double* wr = w + i * units;
            double acc = 0.0;
            for (std::size_t j = 0; j < units; ++j) {
              dwr[j] += v * g[j];
              acc += wr[j] * g[j];
            }
            if (need_input_grad) gin[i] = acc;
          }
          break;
        }
        case LayerKind::conv2d: {
          activation_grad(l.activation, out.values, g);
          const auto d = conv_dims(x.shape, l);
          if (need_input_grad) gin.assign(x.size(), 0.0);
          conv_backward_raw(x.values.data(), model.weights(li).data(), g.data(), d,
                            need_input_grad ? gin.data() : nullptr,
                            grads.data() + model.slots[li].weight_offset,
                            grads.data() + model.slots[li].bias_offset);
          break;
        }
        case LayerKind::maxpool2d: {
          gin.assign(x.size(), 0.0);
          const auto& route = trace.argmax[li];
          for (std::size_t k = 0; k < g.size(); ++k) gin[route[k]] += g[k];
          break;
        }
        case LayerKind::dropout: {
          gin = std::move(g);
          const auto& mask = trace.masks[li];
          if (!mask.empty()) {
            for (std::size_t k = 0; k < gin.size(); ++k) gin[k] *= mask[k];
          }
          break;
        }
        case LayerKind::flatten:
          gin = std::move(g);
          break;
      }
      g = std::move(gin);
      pre_activation = false;
    }
  }

  const double mean_loss = total / static_cast<double>(inputs.size());
  if (!std::isfinite(mean_loss)) throw NumericError("non-finite loss");
  const double scale = 1.0 / static_cast<double>(inputs.size());
  for (double& v : grads) v *= scale;
  return mean_loss;
}

}  // namespace fcnet::nn
