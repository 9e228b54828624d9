#ifndef FEDSIM_MODEL_H_
#define FEDSIM_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fedsim/dataset.h"
#include "fedsim/parameter_set.h"

namespace fedsim {

enum class ModelKind { kLogisticRegression, kMlp1Hidden };
enum class Activation { kRelu, kSigmoid };

std::string_view ToString(ModelKind kind);
std::string_view ToString(Activation act);
// Throws InvalidArgument on an unknown name.
ModelKind ParseModelKind(std::string_view name);
Activation ParseActivation(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;  // mlp only
  Activation activation = Activation::kRelu;  // mlp only

  void Validate() const;
  std::vector<LayerShape> Layout() const;
  std::size_t ParameterCount() const;

  bool operator==(const ModelSpec&) const = default;
};

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  // Index of the first epoch, for shuffling purposes. Training for a+b epochs
  // in one call equals a calls with offset 0 then b calls with offset a.
  std::uint64_t epoch_offset = 0;

  void Validate() const;
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-12;

// Glorot-uniform weights, zero biases. Deterministic in (spec, seed).
ParameterSet InitParams(const ModelSpec& spec, std::uint64_t seed);

// P(label = 1) for every row of `data`.
std::vector<double> Forward(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data);

struct LossAndGradient {
  double loss = 0.0;
  ParameterSet grad;
};

// Mean binary cross-entropy over the rows at `batch` and its gradient.
LossAndGradient LossAndGrad(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data,
                            std::span<const std::size_t> batch);
LossAndGradient LossAndGrad(const ModelSpec& spec, const ParameterSet& params,
                            const Dataset& data);

struct TrainResult {
  ParameterSet params;
  int epochs_run = 0;
};

// Mini-batch gradient descent. Each epoch visits the samples in an order
// drawn from DeriveSeed(cfg.seed, {epoch_offset + e}); the last batch may be
// short.
TrainResult TrainLocal(const ModelSpec& spec, const ParameterSet& params,
                       const Dataset& data, const TrainConfig& cfg);

}  // namespace fedsim

#endif  // FEDSIM_MODEL_H_
