#pragma once

// Flat-parameter classifiers used by every device.
//
// softmax_linear: W (L x d, row-major) then b (L).
// mlp:            W1 (h x d), b1 (h), W2 (L x h), b2 (L); tanh hidden layer.

#include <cstdint>
#include <span>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain::fl {

enum class ModelKind : std::uint8_t { softmax_linear, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::softmax_linear;
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;  // mlp only
  std::uint64_t init_seed = 0;

  std::size_t num_params() const;
  void validate() const;
};

/// Seeded initial weights (N(0, 0.01^2) for the linear model, scaled
/// Glorot-normal for the MLP layers, zero biases).
std::vector<double> init_weights(const ModelSpec& spec);

/// Mean cross-entropy over `rows` of `data`. When `grad` is non-empty it
/// receives the gradient of that mean with respect to `w`.
double loss_and_grad(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data,
                     std::span<const std::size_t> rows, std::span<double> grad);

double loss(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data);

/// Argmax class; ties go to the lowest class index.
std::uint32_t predict(const ModelSpec& spec, std::span<const double> w, const double* x);

double accuracy(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data);

}  // namespace litechain::fl
