#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/model.hpp"
#include "coreg/numeric.hpp"

namespace coreg {

enum class AggregateMode { avg_prob, avg_logit, min_prob };
enum class SelectionPolicy { first, best_dev };

std::string to_string(AggregateMode mode);
AggregateMode parse_aggregate(const std::string& name);
std::string to_string(SelectionPolicy policy);
SelectionPolicy parse_selection(const std::string& name);

struct TrainConfig {
    std::size_t num_models = 2;        // M
    std::size_t epochs = 30;
    std::size_t total_steps = 0;       // T; 0 derives epochs * ceil(N / batch_size)
    double warmup_pct = 30.0;          // alpha, percent of T
    double gamma = 1.0;                // agreement weight
    double kl_eps = kDefaultKlEps;
    std::size_t batch_size = 64;
    double base_lr = 3e-5;
    AggregateMode aggregate = AggregateMode::avg_prob;
    bool soft_target_gradient = false;  // let gradients flow through q
    SelectionPolicy selection = SelectionPolicy::first;
    bool keep_best_checkpoint = true;   // per-epoch dev checkpointing
    std::vector<std::size_t> hidden_sizes{64};
    double dropout = 0.1;
    std::uint64_t master_seed = 1;
};

/// Throws ConfigError when the config is invalid for an ensemble of at least
/// `min_models` models.
void validate(const TrainConfig& config, std::size_t min_models = 2);

/// First step index after warm-up: ceil(alpha / 100 * T).
std::size_t warmup_steps(const TrainConfig& config, std::size_t total_steps);

/// M models with identical architecture and distinct initialization, each
/// owning its optimizer state and dropout stream.
struct ModelEnsemble {
    std::vector<MlpModel> models;
    std::vector<AdamState> optimizers;
    std::vector<Rng> dropout_streams;

    std::size_t size() const { return models.size(); }
};

/// Models are seeded from the "init.k" sub-streams and dropout from
/// "dropout.k" of the master seed.
ModelEnsemble make_ensemble(const TrainConfig& config, std::size_t input_size,
                            std::size_t num_classes);

struct LossReport {
    std::size_t step = 0;
    std::vector<double> per_model_sup;
    double task_loss = 0.0;
    double agreement_loss = 0.0;
    double joint_loss = 0.0;
    bool warmup = false;
    std::size_t kept = 0;  // instances that took part in the update

    friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Soft target for one instance from the M per-model predictions.
ProbDist aggregate_soft_target(std::span<const ProbDist> preds,
                               std::span<const std::vector<double>> logits,
                               std::span<const double> sup_losses, AggregateMode mode);

/// Mean over instances and models of kl_divergence(q_i, p_i^k).
/// preds is indexed [model][instance].
double agreement_loss(std::span<const ProbDist> targets,
                      std::span<const std::vector<ProbDist>> preds, double eps);

/// A training batch: feature views into a dataset plus labels and weights.
struct Batch {
    std::vector<std::span<const double>> features;
    std::vector<int> labels;
    std::vector<double> weights;

    std::size_t size() const { return labels.size(); }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices,
                 std::span<const double> instance_weights = {});

/// Per-step batch intervention used by the small-loss and relabel baselines.
/// Receives each instance's loss averaged over models and the mean predicted
/// distribution; may clear entries of `keep` or overwrite `labels`.
using BatchHook = std::function<void(std::size_t step, std::span<const double> mean_losses,
                                     std::span<const ProbDist> mean_preds,
                                     std::vector<bool>& keep, std::vector<int>& labels)>;

struct StepGradients {
    LossReport report;
    std::vector<std::vector<double>> grads;  // per model, flat parameter layout
};

/// Loss report and per-model parameter gradients of one step, without
/// updating the models. Dropout streams advance as in train_step.
StepGradients step_gradients(const Batch& batch, ModelEnsemble& ensemble, std::size_t t,
                             std::size_t total_steps, const TrainConfig& config,
                             const BatchHook& hook = nullptr);

/// One step of the joint objective. During warm-up every model follows the
/// averaged supervision loss; afterwards the agreement term weighted by gamma
/// is added. Throws DivergenceError on a non-finite loss.
LossReport train_step(const Batch& batch, ModelEnsemble& ensemble, std::size_t t,
                      std::size_t total_steps, const TrainConfig& config,
                      const BatchHook& hook = nullptr);

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t last_step = 0;
    double task_loss = 0.0;       // mean over the epoch's steps
    double agreement_loss = 0.0;
    double joint_loss = 0.0;
    std::vector<double> dev_f1;   // per model, empty without dev data
};

using EpochCallback = std::function<void(const ModelEnsemble&, std::size_t epoch)>;

struct TrainOptions {
    std::vector<double> instance_weights;  // per training example, empty = all 1
    BatchHook hook;
    EpochCallback on_epoch;
    bool record_steps = true;
};

struct TrainResult {
    ModelEnsemble ensemble;  // best checkpoint when checkpointing, else final
    std::vector<LossReport> steps;
    std::vector<EpochRecord> epochs;
    std::size_t total_steps = 0;
    std::size_t checkpoint_epoch = 0;
    std::size_t selected_model = 0;
};

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

/// Shared training engine; accepts any M >= 1.
TrainResult train_ensemble(const Dataset& train_set, const Dataset* dev_set,
                           const TrainConfig& config, const TrainOptions& options = {});

/// Co-regularized training (M >= 2). All models see the same batch sequence,
/// shuffled per epoch from the "data_order" stream.
TrainResult train(const Dataset& train_set, const Dataset* dev_set, const TrainConfig& config,
                  const TrainOptions& options = {});

/// `first` picks model 0; `best_dev` the highest dev F1, ties to the lowest index.
std::size_t select_model(std::span<const double> dev_f1, SelectionPolicy policy);

std::vector<double> evaluate_models(const ModelEnsemble& ensemble, const Dataset& data);

/// Per-model eval-mode predictions for one example.
std::vector<ProbDist> ensemble_predictions(const ModelEnsemble& ensemble,
                                           std::span<const double> features,
                                           std::vector<std::vector<double>>* logits_out = nullptr);

} // namespace coreg
