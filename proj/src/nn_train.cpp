#include "fcnet/error.hpp"
#include "fcnet/nn.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace fcnet::nn {

void adam_step(std::span<double> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, long t,
               const TrainConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() ||
      v.size() != params.size()) {
    throw UsageError("adam_step shape mismatch");
  }
  if (t < 1) throw UsageError("adam step index starts at 1");
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
  }
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw UsageError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = predict_proba(model, data.inputs[i]);
    const int predicted = p[1] >= 0.5 ? 1 : 0;
    correct += predicted == data.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const ModelSpec& spec, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& cfg) {
  if (train_set.size() == 0) throw DataError("training set is empty");
  if (train_set.labels.size() != train_set.inputs.size()) {
    throw DataError("training set needs one label per input");
  }
  for (const int y : train_set.labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  }
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.max_epochs < 1) {
    throw UsageError("learning rate, batch size and epochs must be positive");
  }
  const bool validate = val_set && val_set->size() > 0;

  TrainResult result{init_model(spec, derive_seed(cfg.seed, 0x1417)), {}};
  Model& model = result.model;
  Rng rng(derive_seed(cfg.seed, 0x5eed));

  const std::size_t n_params = model.parameters.size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grads;
  std::vector<double> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  long step = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> batch_inputs;
  std::vector<int> batch_labels;
  std::vector<double> probs;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch_inputs.push_back(train_set.inputs[order[k]]);
        batch_labels.push_back(train_set.labels[order[k]]);
      }
      double loss = 0.0;
      try {
        loss = backward(model, batch_inputs, batch_labels, grads, true, &rng, &probs);
      } catch (const NumericError&) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch));
      }
      adam_step(model.parameters, grads, m, v, ++step, cfg);
      loss_sum += loss * static_cast<double>(stop - start);
      for (std::size_t k = 0; k < probs.size(); ++k) {
        correct += (probs[k] >= 0.5 ? 1 : 0) == batch_labels[k];
      }
    }
    if (!std::all_of(model.parameters.begin(), model.parameters.end(),
                     [](double p) { return std::isfinite(p); })) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (validate) {
      rec.val_loss = batch_loss(model, val_set->inputs, val_set->labels, false);
      rec.val_acc = accuracy(model, *val_set);
    }
    result.history.push_back(rec);

    if (validate && cfg.early_stop_patience) {
      if (*rec.val_loss < best_val) {
        best_val = *rec.val_loss;
        best_params = model.parameters;
        stale = 0;
      } else if (++stale >= *cfg.early_stop_patience) {
        break;
      }
    }
  }
  if (!best_params.empty()) model.parameters = std::move(best_params);
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',';
    if (r.val_loss) out << *r.val_loss;
    out << ',';
    if (r.val_acc) out << *r.val_acc;
    out << '\n';
  }
}

namespace {

nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::conv2d:
      j["filters"] = l.filters;
      j["kernel_size"] = l.kernel_size;
      j["padding"] = l.padding;
      j["activation"] = to_string(l.activation);
      break;
    case LayerKind::maxpool2d:
      j["pool_size"] = l.pool_size;
      j["stride"] = l.stride;
      j["pool_padding"] = l.pool_padding == PoolPadding::same ? "same" : "valid";
      break;
    case LayerKind::dropout:
      j["rate"] = l.rate;
      break;
    case LayerKind::flatten:
      break;
    case LayerKind::dense:
      j["units"] = l.units;
      j["activation"] = to_string(l.activation);
      break;
  }
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "conv2d") {
    return LayerSpec::conv2d(j.at("filters"), j.at("kernel_size"), j.at("padding"),
                             activation_from_string(j.at("activation")));
  }
  if (kind == "maxpool2d") {
    return LayerSpec::maxpool2d(
        j.at("pool_size"), j.at("stride"),
        j.at("pool_padding") == "same" ? PoolPadding::same : PoolPadding::valid);
  }
  if (kind == "dropout") return LayerSpec::dropout(j.at("rate"));
  if (kind == "flatten") return LayerSpec::flatten();
  if (kind == "dense") {
    return LayerSpec::dense(j.at("units"), activation_from_string(j.at("activation")));
  }
  throw DataError("unknown layer kind '" + kind + "'");
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "fcnet-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["seed"] = model.rng_seed;
  auto& spec = doc["spec"];
  spec["input_shape"] = model.spec.input_shape;
  spec["loss"] = to_string(model.spec.loss);
  spec["layers"] = nlohmann::json::array();
  for (const auto& l : model.spec.layers) spec["layers"].push_back(layer_to_json(l));
  doc["parameters"] = model.parameters;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << doc.dump() << '\n';
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  try {
    nlohmann::json doc;
    in >> doc;
    if (doc.at("format") != "fcnet-checkpoint") throw DataError("not a checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + doc.at("version").dump());
    }
    ModelSpec spec;
    spec.input_shape = doc.at("spec").at("input_shape").get<std::array<int, 3>>();
    spec.loss = doc.at("spec").at("loss") == "binary_cross_entropy"
                    ? Loss::binary_cross_entropy
                    : Loss::categorical_cross_entropy;
    for (const auto& l : doc.at("spec").at("layers")) spec.layers.push_back(layer_from_json(l));
    Model model = init_model(spec, doc.at("seed").get<std::uint64_t>());
    auto params = doc.at("parameters").get<std::vector<double>>();
    if (params.size() != model.parameters.size()) {
      throw DataError("checkpoint holds " + std::to_string(params.size()) +
                      " parameters, spec needs " + std::to_string(model.parameters.size()));
    }
    model.parameters = std::move(params);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace fcnet::nn
