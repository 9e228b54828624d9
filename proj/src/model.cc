#include "fedsim/model.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fedsim/error.h"
#include "fedsim/rng.h"

namespace fedsim {

std::string_view ToString(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogisticRegression:
      return "logistic-regression";
    case ModelKind::kMlp1Hidden:
      return "mlp-1hidden";
  }
  return "?";
}

std::string_view ToString(Activation act) {
  return act == Activation::kRelu ? "relu" : "sigmoid";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "logistic-regression") return ModelKind::kLogisticRegression;
  if (name == "mlp-1hidden") return ModelKind::kMlp1Hidden;
  throw InvalidArgument(fmt::format("unknown model kind '{}'", name));
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw InvalidArgument(fmt::format("unknown activation '{}'", name));
}

void ModelSpec::Validate() const {
  if (input_dim == 0) throw InvalidArgument("model input_dim must be positive");
  if (kind == ModelKind::kMlp1Hidden && hidden_dim == 0) {
    throw InvalidArgument("model hidden_dim must be positive");
  }
}

std::vector<LayerShape> ModelSpec::Layout() const {
  if (kind == ModelKind::kLogisticRegression) {
    return {{"dense/kernel", {input_dim, 1}}, {"dense/bias", {1}}};
  }
  return {{"hidden/kernel", {input_dim, hidden_dim}},
          {"hidden/bias", {hidden_dim}},
          {"output/kernel", {hidden_dim, 1}},
          {"output/bias", {1}}};
}

std::size_t ModelSpec::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& s : Layout()) n += s.ElementCount();
  return n;
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and non-negative");
  }
}

namespace {

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Clamp(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void CheckCompatible(const ModelSpec& spec, const ParameterSet& params,
                     const Dataset& data) {
  spec.Validate();
  if (params.shapes != spec.Layout() ||
      params.values.size() != spec.ParameterCount()) {
    throw DimensionError(fmt::format(
        "parameter layout does not match {} model with {} parameters",
        ToString(spec.kind), spec.ParameterCount()));
  }
  if (data.dim() != spec.input_dim) {
    throw DimensionError(fmt::format("feature width {} but model expects {}",
                                     data.dim(), spec.input_dim));
  }
}

// Views into the flat parameter vector, in layout order.
struct MlpView {
  const double* w1;  // [in, hidden] row-major
  const double* b1;  // [hidden]
  const double* w2;  // [hidden]
  const double* b2;  // [1]
};

MlpView ViewMlp(const ModelSpec& spec, const double* base) {
  const std::size_t d = spec.input_dim, h = spec.hidden_dim;
  return {base, base + d * h, base + d * h + h, base + d * h + 2 * h};
}

double Activate(Activation act, double a) {
  return act == Activation::kRelu ? (a > 0.0 ? a : 0.0) : Sigmoid(a);
}

double ActivateDeriv(Activation act, double a, double h) {
  return act == Activation::kRelu ? (a > 0.0 ? 1.0 : 0.0) : h * (1.0 - h);
}

// Output logit for one row; fills hidden pre-activations and activations for
// the mlp.
double Logit(const ModelSpec& spec, const ParameterSet& params,
             std::span<const double> x, std::vector<double>& pre,
             std::vector<double>& hid) {
  const double* p = params.values.data();
  const std::size_t d = spec.input_dim;
  if (spec.kind == ModelKind::kLogisticRegression) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += p[j] * x[j];
    return z + p[d];
  }
  const std::size_t h = spec.hidden_dim;
  const MlpView v = ViewMlp(spec, p);
  pre.assign(h, 0.0);
  hid.assign(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    double a = 0.0;
    for (std::size_t j = 0; j < d; ++j) a += v.w1[j * h + k] * x[j];
    a += v.b1[k];
    pre[k] = a;
    hid[k] = Activate(spec.activation, a);
  }
  double z = 0.0;
  for (std::size_t k = 0; k < h; ++k) z += v.w2[k] * hid[k];
  return z + v.b2[0];
}

}  // namespace

ParameterSet InitParams(const ModelSpec& spec, std::uint64_t seed) {
  spec.Validate();
  ParameterSet out;
  out.shapes = spec.Layout();
  Rng rng(seed);
  for (const auto& layer : out.shapes) {
    const bool is_bias = layer.dims.size() == 1;
    if (is_bias) {
      out.values.insert(out.values.end(), layer.ElementCount(), 0.0);
      continue;
    }
    const double fan_in = static_cast<double>(layer.dims[0]);
    const double fan_out = static_cast<double>(layer.dims[1]);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < layer.ElementCount(); ++i) {
      out.values.push_back(rng.Uniform(-s, s));
    }
  }
  return out;
}

std::vector<double> Forward(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data) {
  CheckCompatible(spec, params, data);
  std::vector<double> probs(data.size());
  std::vector<double> pre, hid;
  for (std::size_t i = 0; i < data.size(); ++i) {
    probs[i] = Clamp(Sigmoid(Logit(spec, params, data.Row(i), pre, hid)));
  }
  return probs;
}

LossAndGradient LossAndGrad(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data,
                            std::span<const std::size_t> batch) {
  CheckCompatible(spec, params, data);
  if (batch.empty()) throw InvalidArgument("loss over an empty batch");

  LossAndGradient out;
  out.grad.shapes = params.shapes;
  out.grad.values.assign(params.values.size(), 0.0);
  double* g = out.grad.values.data();
  const std::size_t d = spec.input_dim;
  std::vector<double> pre, hid;

  double loss_sum = 0.0;
  for (std::size_t i : batch) {
    const auto x = data.Row(i);
    const double y = data.Label(i);
    const double p = Sigmoid(Logit(spec, params, x, pre, hid));
    const double pc = Clamp(p);
    loss_sum += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    const double dz = p - y;

    if (spec.kind == ModelKind::kLogisticRegression) {
      for (std::size_t j = 0; j < d; ++j) g[j] += dz * x[j];
      g[d] += dz;
      continue;
    }
    const std::size_t h = spec.hidden_dim;
    const MlpView v = ViewMlp(spec, params.values.data());
    double* gw1 = g;
    double* gb1 = g + d * h;
    double* gw2 = g + d * h + h;
    double* gb2 = g + d * h + 2 * h;
    for (std::size_t k = 0; k < h; ++k) {
      gw2[k] += dz * hid[k];
      const double da = dz * v.w2[k] * ActivateDeriv(spec.activation, pre[k],
                                                     hid[k]);
      for (std::size_t j = 0; j < d; ++j) gw1[j * h + k] += da * x[j];
      gb1[k] += da;
    }
    gb2[0] += dz;
  }

  const double n = static_cast<double>(batch.size());
  out.loss = loss_sum / n;
  for (double& v : out.grad.values) v /= n;
  return out;
}

LossAndGradient LossAndGrad(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return LossAndGrad(spec, params, data, all);
}

TrainResult TrainLocal(const ModelSpec& spec, const ParameterSet& params,
                       const Dataset& data, const TrainConfig& cfg) {
  cfg.Validate();
  CheckCompatible(spec, params, data);
  if (data.empty()) throw InvalidArgument("local training on an empty dataset");

  TrainResult out{params, 0};
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto order = ShuffledIndices(
        data.size(),
        DeriveSeed(cfg.seed, {cfg.epoch_offset + static_cast<std::uint64_t>(e)}));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto step = LossAndGrad(
          spec, out.params, data,
          std::span<const std::size_t>(order).subspan(start, len));
      for (std::size_t k = 0; k < out.params.values.size(); ++k) {
        out.params.values[k] -= cfg.learning_rate * step.grad.values[k];
      }
    }
    if (!out.params.AllFinite()) {
      throw Error(
          fmt::format("training diverged in epoch {}", cfg.epoch_offset + e));
    }
    ++out.epochs_run;
  }
  return out;
}

}  // namespace fedsim
