#pragma once

#include <string>

namespace fcnet {

enum class Activation { relu, tanh, sigmoid, softmax, linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// One point of the tuned-network search space.
struct HyperParams {
  double dropout_a = 0.25;  // after the first conv block
  double dropout_b = 0.10;  // after the second conv block
  double dropout_c = 0.10;  // after the hidden dense layer
  int dense_units = 160;
  Activation activation = Activation::relu;
  double learning_rate = 1e-3;

  bool operator==(const HyperParams&) const = default;
};

}  // namespace fcnet
