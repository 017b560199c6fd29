#include "coreg/noise_lab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "coreg/error.hpp"
#include "coreg/format.hpp"

namespace coreg {

std::string to_string(NoiseScheme scheme) {
    return scheme == NoiseScheme::uniform_flip ? "uniform_flip" : "class_conditional";
}

NoiseScheme parse_noise_scheme(const std::string& name) {
    if (name == "uniform_flip") return NoiseScheme::uniform_flip;
    if (name == "class_conditional") return NoiseScheme::class_conditional;
    throw ConfigError("unknown noise scheme '" + name + "'");
}

std::size_t FlipMask::flip_count() const {
    return static_cast<std::size_t>(std::count(flipped.begin(), flipped.end(), true));
}

namespace {

int draw_other_class(int label, std::size_t classes, Rng& rng) {
    auto other = static_cast<int>(rng.below(classes - 1));
    return other >= label ? other + 1 : other;
}

int draw_confused_class(int label, const std::vector<std::vector<double>>& table, Rng& rng) {
    const auto& row = table[static_cast<std::size_t>(label)];
    double off_diag = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (static_cast<int>(j) != label) off_diag += row[j];
    }
    if (!(off_diag > 0.0)) return draw_other_class(label, row.size(), rng);
    double u = rng.uniform() * off_diag;
    int last = -1;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (static_cast<int>(j) == label || row[j] <= 0.0) continue;
        last = static_cast<int>(j);
        if (u < row[j]) return last;
        u -= row[j];
    }
    return last;
}

} // namespace

NoisyData inject_noise(const Dataset& data, const NoiseSpec& spec) {
    if (data.num_classes < 2) throw DataError("inject_noise: need at least 2 classes");
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw ConfigError("noise rate must be in [0,1)");
    if (spec.scheme == NoiseScheme::class_conditional) {
        if (spec.confusion.size() != data.num_classes) {
            throw ConfigError("confusion table must be C x C");
        }
        for (const auto& row : spec.confusion) {
            if (row.size() != data.num_classes || !is_valid_distribution(row, 1e-6)) {
                throw ConfigError("confusion table must be row-stochastic");
            }
        }
    }

    NoisyData out;
    out.data = data;
    const std::size_t n = data.size();
    out.mask.flipped.assign(n, false);
    out.mask.original.assign(n, -1);
    for (auto& e : out.data.examples) {
        if (e.true_label < 0) e.true_label = e.label;
    }

    const auto flips = static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(n)));
    if (flips == 0) {
        if (spec.rate > 0.0) out.warnings.push_back("noise rate * N < 1: no labels flipped");
        return out;
    }

    Rng rng(derive_seed(spec.seed, "noise"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(flips));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t i : chosen) {
        auto& e = out.data.examples[i];
        const int before = e.label;
        e.label = spec.scheme == NoiseScheme::uniform_flip
                      ? draw_other_class(before, data.num_classes, rng)
                      : draw_confused_class(before, spec.confusion, rng);
        out.mask.flipped[i] = true;
        out.mask.original[i] = before;
    }
    return out;
}

NoisyCleanSplit split_noisy_clean(std::span<const int> original, std::span<const int> relabels) {
    if (original.size() != relabels.size()) throw DataError("split_noisy_clean: length mismatch");
    NoisyCleanSplit s;
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (original[i] != relabels[i]) {
            s.indices.push_back(i);
            s.noisy_labels.push_back(original[i]);
            s.clean_labels.push_back(relabels[i]);
        }
    }
    return s;
}

std::pair<Dataset, Dataset> build_noisy_clean_sets(const Dataset& data,
                                                   std::span<const int> original,
                                                   std::span<const int> relabels) {
    if (original.size() != data.size()) throw DataError("label count does not match dataset");
    const auto split = split_noisy_clean(original, relabels);
    Dataset noisy = data.subset(split.indices);
    Dataset clean = noisy;
    for (std::size_t r = 0; r < split.indices.size(); ++r) {
        noisy.examples[r].label = split.noisy_labels[r];
        noisy.examples[r].true_label = split.clean_labels[r];
        clean.examples[r].label = split.clean_labels[r];
        clean.examples[r].true_label = split.clean_labels[r];
    }
    return {std::move(noisy), std::move(clean)};
}

std::vector<CurvePoint> noise_overfit_eval(const Dataset& train_set, const Dataset& noisy_set,
                                           const Dataset& clean_set, std::span<const double> gammas,
                                           const TrainConfig& config) {
    std::vector<std::size_t> train_ids, noisy_ids, clean_ids;
    for (const auto& e : train_set.examples) train_ids.push_back(e.id);
    for (const auto& e : noisy_set.examples) noisy_ids.push_back(e.id);
    for (const auto& e : clean_set.examples) clean_ids.push_back(e.id);
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(noisy_ids.begin(), noisy_ids.end());
    std::sort(clean_ids.begin(), clean_ids.end());
    if (noisy_ids != clean_ids) throw DataError("noisy and clean sets must pair the same instances");
    std::vector<std::size_t> overlap;
    std::set_intersection(train_ids.begin(), train_ids.end(), noisy_ids.begin(), noisy_ids.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) throw DataError("training set overlaps the noisy/clean sets");
    if (gammas.empty()) throw ConfigError("gamma grid is empty");

    const Dataset joint = concat(train_set, noisy_set);
    std::vector<CurvePoint> curve;
    for (double gamma : gammas) {
        TrainConfig cfg = config;
        cfg.gamma = gamma;
        cfg.keep_best_checkpoint = false;
        TrainOptions opts;
        opts.record_steps = false;
        opts.on_epoch = [&](const ModelEnsemble& ens, std::size_t epoch) {
            curve.push_back({gamma, epoch, evaluate(ens.models[0], clean_set).f1});
        };
        // gamma = 0 still trains M models so every arm shares the same pipeline.
        train_ensemble(joint, nullptr, cfg, opts);
    }
    return curve;
}

std::vector<ForgettingStats> forgetting_stats(const std::vector<std::vector<bool>>& trajectories) {
    std::vector<ForgettingStats> out;
    out.reserve(trajectories.size());
    const std::size_t len = trajectories.empty() ? 0 : trajectories[0].size();
    for (const auto& traj : trajectories) {
        if (traj.size() != len) throw DataError("forgetting_stats: trajectories differ in length");
        ForgettingStats s;
        for (std::size_t e = 0; e < traj.size(); ++e) {
            if (traj[e] && !s.first_learned_epoch) s.first_learned_epoch = e;
            if (e > 0 && traj[e - 1] && !traj[e]) ++s.forgetting_count;
        }
        out.push_back(s);
    }
    return out;
}

void TrajectoryRecorder::operator()(const ModelEnsemble& ensemble, std::size_t) {
    const auto pred = predict_labels(ensemble.models.at(model_), *data_);
    std::vector<bool> row(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) row[i] = pred[i] == data_->examples[i].label;
    by_epoch_.push_back(std::move(row));
}

std::vector<std::vector<bool>> TrajectoryRecorder::trajectories() const {
    std::vector<std::vector<bool>> out(data_->size(), std::vector<bool>(by_epoch_.size()));
    for (std::size_t e = 0; e < by_epoch_.size(); ++e) {
        for (std::size_t i = 0; i < data_->size(); ++i) out[i][e] = by_epoch_[e][i];
    }
    return out;
}

std::vector<SuspectRow> disagreement_report(const ModelEnsemble& ensemble, const Dataset& data,
                                            const TrainConfig& config) {
    std::vector<SuspectRow> rows;
    rows.reserve(data.size());
    std::vector<std::vector<double>> logits;
    for (const auto& e : data.examples) {
        const auto preds = ensemble_predictions(ensemble, e.features, &logits);
        std::vector<double> losses;
        for (const auto& p : preds) {
            losses.push_back(-std::log(std::max(p[static_cast<std::size_t>(e.label)], kLogFloor)));
        }
        const auto q = aggregate_soft_target(preds, logits, losses, config.aggregate);
        SuspectRow row;
        row.id = e.id;
        row.given_label = e.label;
        row.predicted_label = static_cast<int>(q.argmax());
        for (const auto& p : preds) row.agreement += kl_divergence(q, p, config.kl_eps);
        row.agreement /= static_cast<double>(preds.size());
        for (double l : losses) row.sup_loss += l;
        row.sup_loss /= static_cast<double>(losses.size());
        row.flagged = row.predicted_label != row.given_label;
        row.soft_target.assign(q.values().begin(), q.values().end());
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SuspectRow& a, const SuspectRow& b) { return a.sup_loss > b.sup_loss; });
    return rows;
}

void write_flip_mask(const std::filesystem::path& path, const Dataset& noisy, const FlipMask& mask) {
    if (mask.flipped.size() != noisy.size()) throw DataError("flip mask does not match dataset");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << kFlipMaskHeader << '\n';
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const auto& e = noisy.examples[i];
        out << e.id << ',' << (mask.flipped[i] ? 1 : 0) << ','
            << (mask.flipped[i] ? mask.original[i] : e.label) << ',' << e.label << '\n';
    }
}

FlipMask read_flip_mask(const std::filesystem::path& path, const Dataset& data) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kFlipMaskHeader) {
        throw DataError(path.string() + ": unexpected flip-mask header");
    }
    std::unordered_map<std::size_t, std::size_t> pos;
    for (std::size_t i = 0; i < data.size(); ++i) pos.emplace(data.examples[i].id, i);
    FlipMask mask;
    mask.flipped.assign(data.size(), false);
    mask.original.assign(data.size(), -1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::size_t id;
        int flipped, original, noisy;
        if (!(row >> id >> flipped >> original >> noisy)) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
        auto it = pos.find(id);
        if (it == pos.end()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown id");
        if (flipped) {
            mask.flipped[it->second] = true;
            mask.original[it->second] = original;
        }
    }
    return mask;
}

void write_suspect_report(const std::filesystem::path& path, const std::vector<SuspectRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << kSuspectHeader << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        out << r << ',' << row.id << ',' << row.given_label << ',' << row.predicted_label << ','
            << (row.flagged ? 1 : 0) << ',' << fmt_double(row.sup_loss) << ','
            << fmt_double(row.agreement) << ',';
        for (std::size_t j = 0; j < row.soft_target.size(); ++j) {
            out << (j ? ";" : "") << fmt_double(row.soft_target[j]);
        }
        out << '\n';
    }
}

} // namespace coreg
