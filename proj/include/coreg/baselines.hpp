#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/trainer.hpp"

namespace coreg {

/// Linear pruning/relabeling schedule delta_t = delta_max * t / T (percent).
struct PruneSchedule {
    double delta_max = 0.0;
    std::size_t total_steps = 1;
};

double schedule_delta(const PruneSchedule& schedule, std::size_t t);

/// Number of instances affected in a batch of n: floor(delta_t * n / 100).
std::size_t affected_count(double delta_t, std::size_t n);

/// Indices of the largest-loss instances, largest first; ties resolve to the
/// lower index first.
std::vector<std::size_t> largest_loss_indices(std::span<const double> losses, std::size_t count);

/// Kept indices (ascending) after pruning the floor(delta_t * N / 100)
/// largest-loss instances.
std::vector<std::size_t> small_loss_select(std::span<const double> batch_losses, double delta_t);

/// Relabels the largest-loss instances with the argmax of the mean prediction.
std::vector<int> relabel(std::span<const int> labels, std::span<const double> batch_losses,
                         std::span<const ProbDist> mean_preds, double delta_t);

BatchHook small_loss_hook(double delta_max, std::size_t total_steps);
BatchHook relabel_hook(double delta_max, std::size_t total_steps);

/// Per-instance weights in [0, 1].
class InstanceWeights {
public:
    InstanceWeights() = default;
    explicit InstanceWeights(std::size_t n) : weights_(n, 1.0) {}
    explicit InstanceWeights(std::vector<double> weights);

    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    void set(std::size_t i, double w);
    const std::vector<double>& values() const { return weights_; }

private:
    std::vector<double> weights_;
};

struct CrossWeighConfig {
    std::size_t folds = 3;        // k
    std::size_t iterations = 2;   // r
    double base_weight = 0.7;     // w0; final weight is w0^disagreements
};

/// Fold assignment for one iteration: chunk index per instance, equal-sized
/// chunks (sizes differ by at most one) over a seeded shuffle.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, Rng& rng);

struct CrossWeighResult {
    InstanceWeights weights;
    std::vector<std::size_t> disagreements;
};

/// Trains one plain model per reserved chunk per iteration and down-weights
/// instances whose held-out prediction contradicts their label.
CrossWeighResult crossweigh_weights(const Dataset& data, const CrossWeighConfig& cw,
                                    const TrainConfig& trainer_config);

/// Single-model training through the shared engine (M = 1, gamma = 0).
TrainResult train_plain(const Dataset& train_set, const Dataset* dev_set,
                        const TrainConfig& config, const InstanceWeights* weights = nullptr,
                        const BatchHook& hook = nullptr, const EpochCallback& on_epoch = nullptr);

/// Two-column text table "id<TAB>weight" keyed by example id.
void write_weights(const std::filesystem::path& path, const Dataset& data,
                   const InstanceWeights& weights);
InstanceWeights read_weights(const std::filesystem::path& path, const Dataset& data);

} // namespace coreg
