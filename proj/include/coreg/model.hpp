#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "coreg/rng.hpp"

namespace coreg {

/// Feed-forward classifier with tanh hidden layers and a linear output layer.
///
/// Parameters live in one flat vector, layer by layer, each layer's weight
/// matrix (row-major, out x in) followed by its bias. Optimizer state and
/// gradients share this layout.
class MlpModel {
public:
    MlpModel() = default;
    MlpModel(std::vector<std::size_t> layer_sizes, double dropout, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t num_layers() const { return sizes_.size() - 1; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    double dropout() const { return dropout_; }
    std::uint64_t seed() const { return seed_; }

    std::size_t num_params() const { return params_.size(); }
    std::span<const double> params() const { return params_; }

    /// Mutable access for optimizers. Invalidates outstanding forward caches.
    std::span<double> mutable_params();

    std::uint64_t version() const { return version_; }

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
    }

    static std::size_t param_count(std::span<const std::size_t> layer_sizes);

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    double dropout_ = 0.0;
    std::uint64_t seed_ = 0;
    std::uint64_t version_ = 0;
};

/// He-uniform weights (limit sqrt(6 / fan_in)) and zero biases from the given seed.
MlpModel init_model(std::vector<std::size_t> layer_sizes, double dropout, std::uint64_t seed);

struct ForwardCache {
    std::vector<std::vector<double>> inputs;  // input to each layer (post-dropout)
    std::vector<std::vector<double>> hidden;  // tanh outputs of hidden layers (pre-dropout)
    std::vector<std::vector<double>> masks;   // dropout masks, empty when inactive
    std::vector<double> logits;
    std::uint64_t model_version = 0;
};

/// Dropout is applied to hidden activations only in train mode; the stream is
/// untouched otherwise.
ForwardCache forward(const MlpModel& model, std::span<const double> features, bool train_mode,
                     Rng* rng);

/// Gradient of dot(logits, dlogits) w.r.t. the flat parameter vector.
std::vector<double> backward(const MlpModel& model, const ForwardCache& cache,
                             std::span<const double> dlogits);

/// Same as backward but accumulates into `grad`.
void backward_accumulate(const MlpModel& model, const ForwardCache& cache,
                         std::span<const double> dlogits, std::span<double> grad);

/// Eval-mode logits.
std::vector<double> predict_logits(const MlpModel& model, std::span<const double> features);

} // namespace coreg
