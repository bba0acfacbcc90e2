#pragma once

#include "fcnet/hyperparams.hpp"
#include "fcnet/tensor.hpp"
#include "fcnet/util.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fcnet::nn {

enum class LayerKind { conv2d, maxpool2d, dropout, flatten, dense };
enum class PoolPadding { valid, same };
enum class Loss { categorical_cross_entropy, binary_cross_entropy };

std::string to_string(LayerKind kind);
std::string to_string(Loss loss);

struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  // conv2d
  int filters = 0;
  int kernel_size = 0;
  int padding = 0;
  // conv2d, dense
  Activation activation = Activation::linear;
  // maxpool2d
  int pool_size = 0;
  int stride = 0;
  PoolPadding pool_padding = PoolPadding::valid;
  // dropout
  double rate = 0.0;
  // dense
  int units = 0;

  static LayerSpec conv2d(int filters, int kernel_size, int padding = 0,
                          Activation activation = Activation::relu);
  static LayerSpec maxpool2d(int pool_size, int stride,
                             PoolPadding padding = PoolPadding::valid);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec dense(int units, Activation activation);

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  std::array<int, 3> input_shape{0, 0, 1};  // H, W, C
  std::vector<LayerSpec> layers;
  Loss loss = Loss::categorical_cross_entropy;

  bool operator==(const ModelSpec&) const = default;
};

/// Output shape after every layer. Throws UsageError before anything is
/// allocated if any layer cannot consume its input or the head does not
/// match the loss (2-unit softmax for categorical CE, 1-unit sigmoid for
/// binary CE).
std::vector<Shape> infer_shapes(const ModelSpec& spec);

std::size_t layer_param_count(const ModelSpec& spec, std::size_t layer);
std::size_t param_count(const ModelSpec& spec);

/// conv(16,3) conv(16,3) pool(2,2) dropout conv(32,3) conv(32,3) pool(2,2)
/// dropout flatten dense(units) dropout dense(2, softmax).
ModelSpec build_tuned_spec(int input_h, int input_w, const HyperParams& hp);
inline ModelSpec build_tuned_spec(int input_hw, const HyperParams& hp) {
  return build_tuned_spec(input_hw, input_hw, hp);
}

/// conv(32,2) pool(2,1,same) conv(16,2) pool(2,1,same) flatten dense(10,relu)
/// dense(1,sigmoid).
ModelSpec build_untuned_spec(int input_h, int input_w);
inline ModelSpec build_untuned_spec(int input_hw) {
  return build_untuned_spec(input_hw, input_hw);
}

/// Where a layer's weights and bias live in the flat parameter buffer.
struct ParamSlot {
  std::size_t weight_offset = 0;
  std::size_t weight_size = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_size = 0;
};

struct Model {
  ModelSpec spec;
  std::vector<Shape> shapes;  // output shape per layer
  std::vector<ParamSlot> slots;
  std::vector<double> parameters;
  std::uint64_t rng_seed = 0;

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
};

/// Allocates a model and draws He-uniform weights for relu layers and
/// Glorot-uniform otherwise. Biases start at zero.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

// ---- standalone layer operators ------------------------------------------

/// Stride-1 cross-correlation. input [H,W,C], kernels [k,k,C,F], bias [F].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int padding);
Tensor maxpool2d_forward(const Tensor& input, int pool_size, int stride);
/// Inverted dropout: survivors are scaled by 1/(1 - rate) while training.
Tensor dropout_apply(const Tensor& input, double rate, bool training, Rng& rng);
/// activation(input . weights + bias); input is read as a flat vector.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation activation);

// ---- whole-model passes --------------------------------------------------

/// Per-layer intermediate state kept for the backward pass.
struct ForwardTrace {
  std::vector<Tensor> outputs;                  // [0] is the input
  std::vector<std::vector<double>> masks;       // dropout, scaled
  std::vector<std::vector<std::size_t>> argmax; // maxpool routing
  std::vector<double> logits;                   // head pre-activation
};

/// Dropout masks are drawn from `rng` only when training.
ForwardTrace forward(const Model& model, const Tensor& input, bool training,
                     Rng* rng = nullptr);

/// Loss of one example given the head logits.
double example_loss(Loss loss, std::span<const double> logits, int label);

/// Class probabilities (p0, p1) in inference mode.
std::array<double, 2> predict_proba(const Model& model, const Tensor& input);

/// Mean loss over the batch without gradients.
double batch_loss(const Model& model, std::span<const Tensor> inputs,
                  std::span<const int> labels, bool training, Rng* rng = nullptr);

/// Gradient of the mean batch loss with respect to every parameter, written
/// into `grads` (resized to parameters.size()). Returns the mean loss.
/// Throws NumericError on a non-finite loss. When `positive_prob` is given it
/// receives each example's class-1 probability from the same forward pass.
double backward(const Model& model, std::span<const Tensor> inputs,
                std::span<const int> labels, std::vector<double>& grads,
                bool training, Rng* rng = nullptr,
                std::vector<double>* positive_prob = nullptr);

// ---- optimization ----------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int max_epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::optional<int> early_stop_patience = 10;
  std::uint64_t seed = 0;
};

/// One bias-corrected Adam update at step t (1-based); moments update in place.
void adam_step(std::span<double> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, long t,
               const TrainConfig& cfg);

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_acc;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam. With a validation set and a patience, training stops
/// once validation loss has not improved for `patience` epochs and the
/// best-validation weights are restored.
TrainResult train(const ModelSpec& spec, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& cfg);

/// Fraction of examples whose argmax class matches the label.
double accuracy(const Model& model, const Dataset& data);

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

// ---- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace fcnet::nn
