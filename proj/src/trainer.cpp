#include "coreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coreg/error.hpp"

namespace coreg {

std::string to_string(AggregateMode mode) {
    switch (mode) {
    case AggregateMode::avg_prob: return "avg_prob";
    case AggregateMode::avg_logit: return "avg_logit";
    case AggregateMode::min_prob: return "min_prob";
    }
    return "unknown";
}

AggregateMode parse_aggregate(const std::string& name) {
    if (name == "avg_prob") return AggregateMode::avg_prob;
    if (name == "avg_logit") return AggregateMode::avg_logit;
    if (name == "min_prob") return AggregateMode::min_prob;
    throw ConfigError("unknown aggregate mode '" + name + "'");
}

std::string to_string(SelectionPolicy policy) {
    return policy == SelectionPolicy::first ? "first" : "best_dev";
}

SelectionPolicy parse_selection(const std::string& name) {
    if (name == "first") return SelectionPolicy::first;
    if (name == "best_dev") return SelectionPolicy::best_dev;
    throw ConfigError("unknown selection policy '" + name + "'");
}

void validate(const TrainConfig& c, std::size_t min_models) {
    if (c.num_models < min_models) {
        throw ConfigError("need at least " + std::to_string(min_models) + " models, got " +
                          std::to_string(c.num_models));
    }
    if (!(c.warmup_pct >= 0.0 && c.warmup_pct <= 100.0)) throw ConfigError("alpha must be in [0,100]");
    if (!(c.gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (!(c.kl_eps > 0.0)) throw ConfigError("eps must be positive");
    if (c.batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(c.base_lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
    for (std::size_t h : c.hidden_sizes) {
        if (h == 0) throw ConfigError("hidden layer size must be positive");
    }
}

std::size_t warmup_steps(const TrainConfig& config, std::size_t total_steps) {
    return static_cast<std::size_t>(
        std::ceil(config.warmup_pct * static_cast<double>(total_steps) / 100.0));
}

ModelEnsemble make_ensemble(const TrainConfig& config, std::size_t input_size,
                            std::size_t num_classes) {
    std::vector<std::size_t> arch{input_size};
    arch.insert(arch.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    arch.push_back(num_classes);

    ModelEnsemble ens;
    for (std::size_t k = 0; k < config.num_models; ++k) {
        const auto suffix = std::to_string(k);
        ens.models.push_back(
            init_model(arch, config.dropout, derive_seed(config.master_seed, "init." + suffix)));
        ens.optimizers.push_back(AdamState::fresh(ens.models.back().num_params()));
        ens.dropout_streams.push_back(derive_stream(config.master_seed, "dropout." + suffix));
    }
    return ens;
}

ProbDist aggregate_soft_target(std::span<const ProbDist> preds,
                               std::span<const std::vector<double>> logits,
                               std::span<const double> sup_losses, AggregateMode mode) {
    if (preds.empty()) throw Error("aggregate_soft_target: no predictions");
    const std::size_t m = preds.size();
    const std::size_t c = preds[0].size();
    switch (mode) {
    case AggregateMode::avg_prob: {
        std::vector<double> q(c, 0.0);
        for (const auto& p : preds) {
            if (p.size() != c) throw Error("aggregate_soft_target: class count mismatch");
            for (std::size_t j = 0; j < c; ++j) q[j] += p[j];
        }
        for (double& v : q) v /= static_cast<double>(m);
        return ProbDist(std::move(q));
    }
    case AggregateMode::avg_logit: {
        if (logits.size() != m) throw Error("aggregate_soft_target: logits/preds count mismatch");
        std::vector<double> mean(c, 0.0);
        for (const auto& l : logits) {
            if (l.size() != c) throw Error("aggregate_soft_target: class count mismatch");
            for (std::size_t j = 0; j < c; ++j) mean[j] += l[j];
        }
        for (double& v : mean) v /= static_cast<double>(m);
        return softmax(mean);
    }
    case AggregateMode::min_prob: {
        if (sup_losses.size() != m) throw Error("aggregate_soft_target: loss/preds count mismatch");
        std::size_t best = 0;
        for (std::size_t k = 1; k < m; ++k) {
            if (sup_losses[k] > sup_losses[best]) best = k;
        }
        return preds[best];
    }
    }
    throw Error("aggregate_soft_target: unknown mode");
}

double agreement_loss(std::span<const ProbDist> targets,
                      std::span<const std::vector<ProbDist>> preds, double eps) {
    if (preds.empty() || targets.empty()) throw Error("agreement_loss: empty input");
    const std::size_t n = targets.size();
    for (const auto& model_preds : preds) {
        if (model_preds.size() != n) throw Error("agreement_loss: shape mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& model_preds : preds) total += kl_divergence(targets[i], model_preds[i], eps);
    }
    return total / (static_cast<double>(preds.size()) * static_cast<double>(n));
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices,
                 std::span<const double> instance_weights) {
    Batch b;
    b.features.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto& e = data.examples.at(i);
        b.features.emplace_back(e.features);
        b.labels.push_back(e.label);
        b.weights.push_back(instance_weights.empty() ? 1.0 : instance_weights[i]);
    }
    return b;
}

namespace {

double instance_sup_loss(const ProbDist& p, int label) {
    return -std::log(std::max(p[static_cast<std::size_t>(label)], kLogFloor));
}

[[noreturn]] void report_divergence(const LossReport& r) {
    std::ostringstream os;
    os << "non-finite loss at step " << r.step << ": task=" << r.task_loss
       << " agreement=" << r.agreement_loss << " joint=" << r.joint_loss << " per-model=[";
    for (std::size_t k = 0; k < r.per_model_sup.size(); ++k) {
        os << (k ? "," : "") << r.per_model_sup[k];
    }
    os << "]";
    throw DivergenceError(os.str());
}

} // namespace

StepGradients step_gradients(const Batch& batch, ModelEnsemble& ens, std::size_t t,
                             std::size_t total_steps, const TrainConfig& config, const BatchHook& hook) {
    const std::size_t m = ens.size();
    const std::size_t n = batch.size();
    if (m == 0) throw Error("train_step: empty ensemble");
    if (n == 0) throw Error("train_step: empty batch");
    if (t >= total_steps) throw Error("train_step: step index beyond total steps");

    // Forward every model on the same batch.
    std::vector<std::vector<ForwardCache>> caches(m);
    std::vector<std::vector<ProbDist>> probs(m);
    for (std::size_t k = 0; k < m; ++k) {
        caches[k].reserve(n);
        probs[k].reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            caches[k].push_back(forward(ens.models[k], batch.features[i], true, &ens.dropout_streams[k]));
            const auto& z = caches[k].back().logits;
            if (!std::all_of(z.begin(), z.end(), [](double v) { return std::isfinite(v); })) {
                throw DivergenceError("non-finite logits at step " + std::to_string(t) + ", model " +
                                      std::to_string(k) + ", batch position " + std::to_string(i));
            }
            probs[k].push_back(softmax(z));
        }
    }

    std::vector<int> labels = batch.labels;
    std::vector<bool> keep(n, true);
    if (hook) {
        std::vector<double> mean_losses(n, 0.0);
        std::vector<ProbDist> mean_preds;
        mean_preds.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> mean(probs[0][i].size(), 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                mean_losses[i] += instance_sup_loss(probs[k][i], labels[i]);
                for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += probs[k][i][j];
            }
            mean_losses[i] /= static_cast<double>(m);
            for (double& v : mean) v /= static_cast<double>(m);
            mean_preds.emplace_back(std::move(mean));
        }
        hook(t, mean_losses, mean_preds, keep, labels);
        if (keep.size() != n || labels.size() != n) throw Error("batch hook changed batch shape");
    }

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) kept.push_back(i);
    }

    StepGradients out;
    LossReport& report = out.report;
    report.step = t;
    report.kept = kept.size();
    report.warmup = t < warmup_steps(config, total_steps);
    report.per_model_sup.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) out.grads.emplace_back(ens.models[k].num_params(), 0.0);
    if (kept.empty()) return out;

    const double n_kept = static_cast<double>(kept.size());
    const double md = static_cast<double>(m);

    // Per-instance supervision losses and soft targets.
    std::vector<std::vector<double>> inst_loss(n, std::vector<double>(m, 0.0));
    for (std::size_t i : kept) {
        for (std::size_t k = 0; k < m; ++k) {
            inst_loss[i][k] = instance_sup_loss(probs[k][i], labels[i]);
            report.per_model_sup[k] += batch.weights[i] * inst_loss[i][k];
        }
    }
    for (double& l : report.per_model_sup) l /= n_kept;
    for (double l : report.per_model_sup) report.task_loss += l;
    report.task_loss /= md;

    std::vector<ProbDist> targets(n);
    double agg_total = 0.0;
    for (std::size_t i : kept) {
        std::vector<ProbDist> preds;
        std::vector<std::vector<double>> logits;
        for (std::size_t k = 0; k < m; ++k) {
            preds.push_back(probs[k][i]);
            logits.push_back(caches[k][i].logits);
        }
        targets[i] = aggregate_soft_target(preds, logits, inst_loss[i], config.aggregate);
        for (std::size_t k = 0; k < m; ++k) agg_total += kl_divergence(targets[i], probs[k][i], config.kl_eps);
    }
    report.agreement_loss = agg_total / (md * n_kept);
    report.joint_loss = report.task_loss + config.gamma * report.agreement_loss;

    if (!std::isfinite(report.task_loss) || !std::isfinite(report.agreement_loss) ||
        !std::isfinite(report.joint_loss)) {
        report_divergence(report);
    }

    const bool use_agreement = !report.warmup && config.gamma > 0.0 && m > 1;
    const double agg_scale = config.gamma / (md * n_kept);

    // dL/dlogits for every (model, instance).
    std::vector<std::vector<std::vector<double>>> dlogits(
        m, std::vector<std::vector<double>>(n));
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i : kept) {
            auto g = cross_entropy_grad_logits(probs[k][i], labels[i]);
            const double scale = batch.weights[i] / (md * n_kept);
            for (double& v : g) v *= scale;
            if (use_agreement) {
                const auto gk = kl_grad_logits(targets[i], probs[k][i], config.kl_eps);
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += agg_scale * gk[j];
            }
            dlogits[k][i] = std::move(g);
        }
    }

    if (use_agreement && config.soft_target_gradient) {
        for (std::size_t i : kept) {
            const std::size_t c = targets[i].size();
            std::vector<double> gq(c, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                const auto g = kl_grad_target(targets[i], probs[k][i], config.kl_eps);
                for (std::size_t j = 0; j < c; ++j) gq[j] += agg_scale * g[j];
            }
            switch (config.aggregate) {
            case AggregateMode::avg_prob: {
                for (double& v : gq) v /= md;
                for (std::size_t k = 0; k < m; ++k) {
                    const auto g = softmax_vjp(probs[k][i], gq);
                    for (std::size_t j = 0; j < c; ++j) dlogits[k][i][j] += g[j];
                }
                break;
            }
            case AggregateMode::avg_logit: {
                const auto g = softmax_vjp(targets[i], gq);
                for (std::size_t k = 0; k < m; ++k) {
                    for (std::size_t j = 0; j < c; ++j) dlogits[k][i][j] += g[j] / md;
                }
                break;
            }
            case AggregateMode::min_prob: {
                std::size_t best = 0;
                for (std::size_t k = 1; k < m; ++k) {
                    if (inst_loss[i][k] > inst_loss[i][best]) best = k;
                }
                const auto g = softmax_vjp(probs[best][i], gq);
                for (std::size_t j = 0; j < c; ++j) dlogits[best][i][j] += g[j];
                break;
            }
            }
        }
    }

    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i : kept) backward_accumulate(ens.models[k], caches[k][i], dlogits[k][i], out.grads[k]);
    }
    return out;
}

LossReport train_step(const Batch& batch, ModelEnsemble& ens, std::size_t t,
                      std::size_t total_steps, const TrainConfig& config, const BatchHook& hook) {
    StepGradients step = step_gradients(batch, ens, t, total_steps, config, hook);
    const double lr = lr_at(LrSchedule{config.base_lr, total_steps}, t);
    for (std::size_t k = 0; k < ens.size(); ++k) {
        adam_step(ens.models[k].mutable_params(), step.grads[k], ens.optimizers[k], lr);
    }
    return std::move(step.report);
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
    return (dataset_size + batch_size - 1) / batch_size;
}

std::size_t select_model(std::span<const double> dev_f1, SelectionPolicy policy) {
    if (policy == SelectionPolicy::first || dev_f1.empty()) return 0;
    std::size_t best = 0;
    for (std::size_t k = 1; k < dev_f1.size(); ++k) {
        if (dev_f1[k] > dev_f1[best]) best = k;
    }
    return best;
}

std::vector<double> evaluate_models(const ModelEnsemble& ensemble, const Dataset& data) {
    std::vector<double> out;
    for (const auto& model : ensemble.models) out.push_back(evaluate(model, data).f1);
    return out;
}

std::vector<ProbDist> ensemble_predictions(const ModelEnsemble& ensemble,
                                           std::span<const double> features,
                                           std::vector<std::vector<double>>* logits_out) {
    std::vector<ProbDist> preds;
    if (logits_out) logits_out->clear();
    for (const auto& model : ensemble.models) {
        auto logits = predict_logits(model, features);
        preds.push_back(softmax(logits));
        if (logits_out) logits_out->push_back(std::move(logits));
    }
    return preds;
}

TrainResult train_ensemble(const Dataset& train_set, const Dataset* dev_set,
                           const TrainConfig& config, const TrainOptions& options) {
    validate(config, 1);
    if (train_set.empty()) throw DataError("training set is empty");
    if (config.selection == SelectionPolicy::best_dev && (dev_set == nullptr || dev_set->empty())) {
        throw ConfigError("best_dev selection needs a non-empty dev set");
    }
    if (!options.instance_weights.empty() && options.instance_weights.size() != train_set.size()) {
        throw ConfigError("instance weight count does not match training set");
    }

    TrainResult result;
    result.ensemble = make_ensemble(config, train_set.num_features, train_set.num_classes);
    const std::size_t per_epoch = steps_per_epoch(train_set.size(), config.batch_size);
    const std::size_t total =
        config.total_steps > 0 ? config.total_steps : config.epochs * per_epoch;
    result.total_steps = total;

    const bool have_dev = dev_set != nullptr && !dev_set->empty();
    const bool checkpointing = config.keep_best_checkpoint && have_dev;
    ModelEnsemble best = result.ensemble;
    double best_score = -1.0;

    Rng order_stream = derive_stream(config.master_seed, "data_order");
    std::vector<std::size_t> order(train_set.size());
    EpochRecord current;
    std::size_t epoch_steps = 0;

    for (std::size_t t = 0; t < total; ++t) {
        const std::size_t pos = t % per_epoch;
        if (pos == 0) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            order_stream.shuffle(std::span<std::size_t>(order));
        }
        const std::size_t begin = pos * config.batch_size;
        const std::size_t end = std::min(begin + config.batch_size, order.size());
        const auto batch = make_batch(
            train_set, std::span<const std::size_t>(order).subspan(begin, end - begin),
            options.instance_weights);
        auto report = train_step(batch, result.ensemble, t, total, config, options.hook);

        current.task_loss += report.task_loss;
        current.agreement_loss += report.agreement_loss;
        current.joint_loss += report.joint_loss;
        ++epoch_steps;
        if (options.record_steps) result.steps.push_back(std::move(report));

        if (pos + 1 == per_epoch || t + 1 == total) {
            current.epoch = result.epochs.size();
            current.last_step = t;
            const double denom = static_cast<double>(epoch_steps);
            current.task_loss /= denom;
            current.agreement_loss /= denom;
            current.joint_loss /= denom;
            if (have_dev) current.dev_f1 = evaluate_models(result.ensemble, *dev_set);
            if (options.on_epoch) options.on_epoch(result.ensemble, current.epoch);
            if (checkpointing) {
                const std::size_t k = select_model(current.dev_f1, config.selection);
                if (current.dev_f1[k] > best_score) {
                    best_score = current.dev_f1[k];
                    best = result.ensemble;
                    result.checkpoint_epoch = current.epoch;
                }
            }
            result.epochs.push_back(std::move(current));
            current = EpochRecord{};
            epoch_steps = 0;
        }
    }

    if (checkpointing && !result.epochs.empty()) {
        result.ensemble = std::move(best);
    } else if (!result.epochs.empty()) {
        result.checkpoint_epoch = result.epochs.size() - 1;
    }
    if (!result.epochs.empty() && checkpointing) {
        result.selected_model =
            select_model(result.epochs[result.checkpoint_epoch].dev_f1, config.selection);
    } else if (have_dev) {
        result.selected_model =
            select_model(evaluate_models(result.ensemble, *dev_set), config.selection);
    }
    return result;
}

TrainResult train(const Dataset& train_set, const Dataset* dev_set, const TrainConfig& config,
                  const TrainOptions& options) {
    validate(config, 2);
    return train_ensemble(train_set, dev_set, config, options);
}

} // namespace coreg
