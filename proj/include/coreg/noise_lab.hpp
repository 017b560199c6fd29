#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/trainer.hpp"

namespace coreg {

/// Noise rates of the two benchmark corpora the method targets.
inline constexpr double kRelationNoiseRate = 0.0662;
inline constexpr double kTaggingNoiseRate = 0.0538;

enum class NoiseScheme { uniform_flip, class_conditional };

std::string to_string(NoiseScheme scheme);
NoiseScheme parse_noise_scheme(const std::string& name);

struct NoiseSpec {
    double rate = kRelationNoiseRate;
    NoiseScheme scheme = NoiseScheme::uniform_flip;
    std::uint64_t seed = 0;
    /// Row-stochastic C x C table for class_conditional: row y gives the
    /// distribution of the replacement label. Diagonal mass is ignored.
    std::vector<std::vector<double>> confusion;
};

/// Which instances were flipped, and their labels before the flip.
struct FlipMask {
    std::vector<bool> flipped;
    std::vector<int> original;  // -1 for untouched instances

    std::size_t flip_count() const;
};

struct NoisyData {
    Dataset data;
    FlipMask mask;
    std::vector<std::string> warnings;
};

/// Flips exactly floor(rate * N) labels chosen by a seeded draw. Uniform flips
/// draw the new label from the other C-1 classes. Original labels are kept as
/// true labels when the dataset did not already carry them.
NoisyData inject_noise(const Dataset& data, const NoiseSpec& spec);

struct NoisyCleanSplit {
    std::vector<std::size_t> indices;  // positions whose labels disagree
    std::vector<int> noisy_labels;     // original labels
    std::vector<int> clean_labels;     // relabels
};

NoisyCleanSplit split_noisy_clean(std::span<const int> original, std::span<const int> relabels);

/// Noisy set (original labels) and clean set (rectified labels) over the
/// instances where the two label sources disagree.
std::pair<Dataset, Dataset> build_noisy_clean_sets(const Dataset& data,
                                                   std::span<const int> original,
                                                   std::span<const int> relabels);

struct CurvePoint {
    double gamma = 0.0;
    std::size_t epoch = 0;
    double clean_f1 = 0.0;
};

/// For each gamma, trains on train ∪ noisy and scores model f_1 on the clean
/// set after every epoch. gamma = 0 is the uncoupled baseline.
std::vector<CurvePoint> noise_overfit_eval(const Dataset& train_set, const Dataset& noisy_set,
                                           const Dataset& clean_set, std::span<const double> gammas,
                                           const TrainConfig& config);

/// Per-epoch correctness of every tracked instance; rows are epochs.
using TrajectoryMatrix = std::vector<std::vector<bool>>;

struct ForgettingStats {
    std::optional<std::size_t> first_learned_epoch;
    std::size_t forgetting_count = 0;
    bool never_learned() const { return !first_learned_epoch.has_value(); }
};

/// trajectories[i][e] is whether instance i was predicted correctly after epoch e.
std::vector<ForgettingStats> forgetting_stats(const std::vector<std::vector<bool>>& trajectories);

/// Records per-epoch correctness on `data` against its (possibly noisy) labels.
class TrajectoryRecorder {
public:
    explicit TrajectoryRecorder(const Dataset& data, std::size_t model_index = 0)
        : data_(&data), model_(model_index) {}

    void operator()(const ModelEnsemble& ensemble, std::size_t epoch);

    /// Instance-major view: result[i][e].
    std::vector<std::vector<bool>> trajectories() const;

private:
    const Dataset* data_;
    std::size_t model_;
    TrajectoryMatrix by_epoch_;
};

struct SuspectRow {
    std::size_t id = 0;
    int given_label = 0;
    int predicted_label = 0;  // argmax of the soft target
    double agreement = 0.0;   // mean_k kl(q || p^k)
    double sup_loss = 0.0;    // mean_k -log p^k_label
    bool flagged = false;
    std::vector<double> soft_target;
};

/// Rows for every instance ranked by supervision loss (descending, ties by
/// original order); rows where argmax(q) differs from the given label are flagged.
std::vector<SuspectRow> disagreement_report(const ModelEnsemble& ensemble, const Dataset& data,
                                            const TrainConfig& config);

void write_flip_mask(const std::filesystem::path& path, const Dataset& noisy, const FlipMask& mask);
FlipMask read_flip_mask(const std::filesystem::path& path, const Dataset& data);

void write_suspect_report(const std::filesystem::path& path, const std::vector<SuspectRow>& rows);

inline constexpr const char* kFlipMaskHeader = "id,flipped,original_label,noisy_label";
inline constexpr const char* kSuspectHeader =
    "rank,id,given_label,predicted_label,flagged,sup_loss,agreement,soft_target";

} // namespace coreg
