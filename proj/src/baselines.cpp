#include "coreg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "coreg/error.hpp"
#include "coreg/format.hpp"

namespace coreg {

double schedule_delta(const PruneSchedule& s, std::size_t t) {
    if (s.total_steps == 0) return s.delta_max;
    return s.delta_max * static_cast<double>(t) / static_cast<double>(s.total_steps);
}

std::size_t affected_count(double delta_t, std::size_t n) {
    // Tolerate representation error so that e.g. 25% of 4 is exactly 1.
    const double raw = delta_t * static_cast<double>(n) / 100.0;
    const double snapped = std::round(raw);
    const double value = std::abs(raw - snapped) < 1e-9 ? snapped : std::floor(raw);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, value)));
}

std::vector<std::size_t> largest_loss_indices(std::span<const double> losses, std::size_t count) {
    std::vector<std::size_t> idx(losses.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    idx.resize(std::min(count, idx.size()));
    return idx;
}

std::vector<std::size_t> small_loss_select(std::span<const double> batch_losses, double delta_t) {
    const auto pruned = largest_loss_indices(batch_losses, affected_count(delta_t, batch_losses.size()));
    std::vector<bool> drop(batch_losses.size(), false);
    for (std::size_t i : pruned) drop[i] = true;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < batch_losses.size(); ++i) {
        if (!drop[i]) kept.push_back(i);
    }
    return kept;
}

std::vector<int> relabel(std::span<const int> labels, std::span<const double> batch_losses,
                         std::span<const ProbDist> mean_preds, double delta_t) {
    if (labels.size() != batch_losses.size() || labels.size() != mean_preds.size()) {
        throw Error("relabel: batch shape mismatch");
    }
    std::vector<int> out(labels.begin(), labels.end());
    for (std::size_t i : largest_loss_indices(batch_losses, affected_count(delta_t, labels.size()))) {
        out[i] = static_cast<int>(mean_preds[i].argmax());
    }
    return out;
}

BatchHook small_loss_hook(double delta_max, std::size_t total_steps) {
    return [=](std::size_t t, std::span<const double> losses, std::span<const ProbDist>,
               std::vector<bool>& keep, std::vector<int>&) {
        const double delta_t = schedule_delta({delta_max, total_steps}, t);
        std::fill(keep.begin(), keep.end(), false);
        for (std::size_t i : small_loss_select(losses, delta_t)) keep[i] = true;
    };
}

BatchHook relabel_hook(double delta_max, std::size_t total_steps) {
    return [=](std::size_t t, std::span<const double> losses, std::span<const ProbDist> preds,
               std::vector<bool>&, std::vector<int>& labels) {
        const double delta_t = schedule_delta({delta_max, total_steps}, t);
        labels = relabel(labels, losses, preds, delta_t);
    };
}

InstanceWeights::InstanceWeights(std::vector<double> weights) : weights_(std::move(weights)) {
    for (double w : weights_) {
        if (!(w >= 0.0 && w <= 1.0)) throw DataError("instance weight outside [0,1]");
    }
}

void InstanceWeights::set(std::size_t i, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw DataError("instance weight outside [0,1]");
    weights_.at(i) = w;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, Rng& rng) {
    if (folds < 2) throw ConfigError("crossweigh needs at least 2 folds");
    if (n < folds) throw DataError("crossweigh: more folds than instances");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> fold(n);
    for (std::size_t r = 0; r < n; ++r) fold[order[r]] = r * folds / n;
    return fold;
}

TrainResult train_plain(const Dataset& train_set, const Dataset* dev_set, const TrainConfig& config,
                        const InstanceWeights* weights, const BatchHook& hook,
                        const EpochCallback& on_epoch) {
    TrainConfig single = config;
    single.num_models = 1;
    single.gamma = 0.0;
    TrainOptions opts;
    if (weights) opts.instance_weights = weights->values();
    opts.hook = hook;
    opts.on_epoch = on_epoch;
    return train_ensemble(train_set, dev_set, single, opts);
}

CrossWeighResult crossweigh_weights(const Dataset& data, const CrossWeighConfig& cw,
                                    const TrainConfig& trainer_config) {
    if (cw.iterations == 0) throw ConfigError("crossweigh needs at least one iteration");
    if (!(cw.base_weight >= 0.0 && cw.base_weight <= 1.0)) {
        throw ConfigError("crossweigh base weight must be in [0,1]");
    }
    const std::size_t n = data.size();
    CrossWeighResult result;
    result.disagreements.assign(n, 0);

    for (std::size_t it = 0; it < cw.iterations; ++it) {
        Rng fold_rng = derive_stream(trainer_config.master_seed, "crossweigh.folds." + std::to_string(it));
        const auto fold = fold_assignment(n, cw.folds, fold_rng);
        for (std::size_t f = 0; f < cw.folds; ++f) {
            std::vector<std::size_t> train_idx, held_idx;
            for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held_idx : train_idx).push_back(i);
            TrainConfig cfg = trainer_config;
            cfg.master_seed = derive_seed(trainer_config.master_seed,
                                          "crossweigh.model." + std::to_string(it) + "." + std::to_string(f));
            cfg.keep_best_checkpoint = false;
            cfg.selection = SelectionPolicy::first;
            auto trained = train_plain(data.subset(train_idx), nullptr, cfg);
            const auto held = data.subset(held_idx);
            const auto pred = predict_labels(trained.ensemble.models[0], held);
            for (std::size_t r = 0; r < held_idx.size(); ++r) {
                if (pred[r] != held.examples[r].label) ++result.disagreements[held_idx[r]];
            }
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::pow(cw.base_weight, static_cast<double>(result.disagreements[i]));
    }
    result.weights = InstanceWeights(std::move(w));
    return result;
}

void write_weights(const std::filesystem::path& path, const Dataset& data,
                   const InstanceWeights& weights) {
    if (weights.size() != data.size()) throw DataError("weight count does not match dataset");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.examples[i].id << '\t' << fmt_double(weights[i]) << '\n';
    }
}

InstanceWeights read_weights(const std::filesystem::path& path, const Dataset& data) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::unordered_map<std::size_t, std::size_t> pos;
    for (std::size_t i = 0; i < data.size(); ++i) pos.emplace(data.examples[i].id, i);
    InstanceWeights weights(data.size());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t id;
        double w;
        if (!(row >> id >> w)) throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        auto it = pos.find(id);
        if (it == pos.end()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown id");
        weights.set(it->second, w);
    }
    return weights;
}

} // namespace coreg
