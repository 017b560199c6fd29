#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coreg/baselines.hpp"
#include "coreg/dataset.hpp"
#include "coreg/noise_lab.hpp"
#include "coreg/synthetic.hpp"
#include "coreg/trainer.hpp"

namespace coreg {

enum class Method { coreg, plain, small_loss, relabel, crossweigh };

std::string to_string(Method method);
Method parse_method(const std::string& name);

/// Environment variable naming the root for relative output directories.
inline constexpr const char* kOutputRootEnv = "COREG_OUTPUT_ROOT";

struct DataPaths {
    std::filesystem::path train, dev, test, schema;
    std::filesystem::path pool;      // analyze-noise: instances for the noisy/clean sets
    std::filesystem::path relabels;  // analyze-noise: "id,label" rectified labels for the pool
    std::size_t window = 1;          // tagging context window
};

enum class SyntheticKind { gaussian, tagging };

struct SyntheticSettings {
    SyntheticKind kind = SyntheticKind::gaussian;
    GaussianMixtureSpec gaussian;
    TaggingToySpec tagging;
    std::optional<std::uint64_t> data_seed;  // defaults to the run seed
};

struct AnalysisSettings {
    std::vector<double> gammas{0.0, 1.0, 5.0, 20.0};
    std::size_t pool_size = 1000;    // synthetic: extra instances drawn for the noisy set
    double pool_noise_rate = 0.5;    // synthetic: fraction of the pool that gets flipped
};

struct ExperimentConfig {
    TaskKind task = TaskKind::synthetic;
    Method method = Method::coreg;
    DataPaths data;
    SyntheticSettings synthetic;
    TrainConfig train;
    std::optional<NoiseSpec> noise;  // seed is replaced per run seed
    double delta_max = 8.0;          // small_loss / relabel
    CrossWeighConfig crossweigh;
    AnalysisSettings analysis;
    std::filesystem::path output_dir = "runs/default";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

/// Task-dependent defaults: learning rate 3e-5 (relation), 1e-5 (tagging),
/// 1e-2 (synthetic); other values follow the standard setup (batch 64,
/// dropout 0.1, M = 2, avg_prob).
ExperimentConfig default_config(TaskKind task);

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Checks referenced paths and invariants; throws ConfigError.
void validate(const ExperimentConfig& config);

/// Output directory with kOutputRootEnv applied to relative paths.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

struct TaskData {
    Dataset train, dev, test;
    std::optional<FlipMask> train_flips;
};

/// Loads or generates the splits for one seed and applies configured noise.
TaskData build_task_data(const ExperimentConfig& config, std::uint64_t seed);

struct SeedRow {
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::optional<F1Report> dev;
    std::optional<F1Report> test;
    std::size_t selected_model = 0;
    std::size_t checkpoint_epoch = 0;
};

struct RunManifest {
    std::string config_hash;
    std::vector<SeedRow> rows;
    std::optional<F1Report> median_dev;
    std::optional<F1Report> median_test;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> artifacts;
    bool failed = false;
    int exit_code = 0;
    std::string error;
};

/// Componentwise median (mean of the middle pair for even counts).
F1Report median_report(std::vector<F1Report> reports);

inline constexpr const char* kMetricsHeader = "seed,split,tp,fp,fn,precision,recall,f1";
inline constexpr const char* kCurveHeader = "method,gamma,seed,epoch,split,metric,value";
inline constexpr const char* kStepHeader = "step,warmup,kept,task_loss,agreement_loss,joint_loss,per_model_sup";

/// Trains the configured method for every seed and writes config.json,
/// manifest.json, metrics.csv, logs/ and predictions into the output directory.
RunManifest run_experiment(const ExperimentConfig& config);

/// Noise-overfit protocol over the configured gamma grid; writes
/// analysis_curves.csv and analysis_summary.csv.
RunManifest run_noise_analysis(const ExperimentConfig& config);

/// Trains co-regularized ensembles and writes ranked suspect-label reports plus
/// audit_summary.csv with AUROC against known flips.
RunManifest run_label_audit(const ExperimentConfig& config);

/// Collects every per-epoch log of a run into one long-format CSV
/// (kCurveHeader). Returns the row count.
std::size_t export_curves(const std::filesystem::path& run_dir, const std::filesystem::path& out_path);

std::string hash_text(const std::string& text);

} // namespace coreg
