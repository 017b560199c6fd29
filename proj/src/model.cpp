#include "coreg/model.hpp"

#include <cmath>
#include <string>

#include "coreg/error.hpp"
#include "coreg/numeric.hpp"

namespace coreg {

std::size_t MlpModel::param_count(std::span<const std::size_t> sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, double dropout, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), dropout_(dropout), seed_(seed) {
    if (sizes_.size() < 2) throw ConfigError("model needs at least input and output layers");
    for (std::size_t s : sizes_) {
        if (s == 0) throw ConfigError("model layer size must be positive");
    }
    if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw ConfigError("dropout must be in [0,1)");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(offset);
        offset += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
}

std::span<double> MlpModel::mutable_params() {
    ++version_;
    return params_;
}

MlpModel init_model(std::vector<std::size_t> layer_sizes, double dropout, std::uint64_t seed) {
    MlpModel model(std::move(layer_sizes), dropout, seed);
    Rng rng(seed);
    auto params = model.mutable_params();
    const auto& sizes = model.layer_sizes();
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l]));
        const std::size_t begin = model.weight_offset(l);
        const std::size_t count = sizes[l] * sizes[l + 1];
        for (std::size_t i = 0; i < count; ++i) params[begin + i] = rng.uniform(-limit, limit);
    }
    return model;
}

ForwardCache forward(const MlpModel& model, std::span<const double> features, bool train_mode,
                     Rng* rng) {
    if (features.size() != model.input_size()) {
        throw Error("forward: feature length " + std::to_string(features.size()) +
                    " != input size " + std::to_string(model.input_size()));
    }
    const bool use_dropout = train_mode && model.dropout() > 0.0;
    if (use_dropout && rng == nullptr) throw Error("forward: dropout requires an rng stream");

    const auto& sizes = model.layer_sizes();
    const auto params = model.params();
    ForwardCache cache;
    cache.model_version = model.version();
    cache.inputs.emplace_back(features.begin(), features.end());

    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const std::size_t in = sizes[l];
        const std::size_t out = sizes[l + 1];
        const double* w = params.data() + model.weight_offset(l);
        const double* b = params.data() + model.bias_offset(l);
        const auto& x = cache.inputs.back();
        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            z[o] = acc;
        }
        if (l + 1 == model.num_layers()) {
            cache.logits = std::move(z);
            break;
        }
        for (double& v : z) v = std::tanh(v);
        cache.hidden.push_back(z);
        if (use_dropout) {
            auto mask = dropout_mask(out, model.dropout(), *rng);
            for (std::size_t o = 0; o < out; ++o) z[o] *= mask[o];
            cache.masks.push_back(std::move(mask));
        } else {
            cache.masks.emplace_back();
        }
        cache.inputs.push_back(std::move(z));
    }
    return cache;
}

void backward_accumulate(const MlpModel& model, const ForwardCache& cache,
                         std::span<const double> dlogits, std::span<double> grad) {
    if (cache.model_version != model.version() || cache.inputs.size() != model.num_layers()) {
        throw Error("backward: stale forward cache");
    }
    if (dlogits.size() != model.output_size()) throw Error("backward: dlogits length mismatch");
    if (grad.size() != model.num_params()) throw Error("backward: gradient length mismatch");

    const auto& sizes = model.layer_sizes();
    const auto params = model.params();
    std::vector<double> delta(dlogits.begin(), dlogits.end());

    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const std::size_t in = sizes[l];
        const std::size_t out = sizes[l + 1];
        const auto& x = cache.inputs[l];
        double* gw = grad.data() + model.weight_offset(l);
        double* gb = grad.data() + model.bias_offset(l);
        for (std::size_t o = 0; o < out; ++o) {
            const double d = delta[o];
            gb[o] += d;
            if (d == 0.0) continue;
            double* row = gw + o * in;
            for (std::size_t i = 0; i < in; ++i) row[i] += d * x[i];
        }
        if (l == 0) break;

        // Propagate into the previous hidden layer: through W, dropout, tanh.
        const double* w = params.data() + model.weight_offset(l);
        std::vector<double> prev(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
        }
        const auto& mask = cache.masks[l - 1];
        const auto& h = cache.hidden[l - 1];
        for (std::size_t i = 0; i < in; ++i) {
            if (!mask.empty()) prev[i] *= mask[i];
            prev[i] *= 1.0 - h[i] * h[i];
        }
        delta = std::move(prev);
    }
}

std::vector<double> backward(const MlpModel& model, const ForwardCache& cache,
                             std::span<const double> dlogits) {
    std::vector<double> grad(model.num_params(), 0.0);
    backward_accumulate(model, cache, dlogits, grad);
    return grad;
}

std::vector<double> predict_logits(const MlpModel& model, std::span<const double> features) {
    return forward(model, features, false, nullptr).logits;
}

} // namespace coreg
