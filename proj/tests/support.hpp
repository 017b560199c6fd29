// Generators and reference implementations shared by the test binaries.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "coreg/dataset.hpp"
#include "coreg/metrics.hpp"
#include "coreg/numeric.hpp"
#include "coreg/rng.hpp"
#include "coreg/trainer.hpp"

namespace coreg::testing {

inline std::vector<double> random_logits(Rng& rng, std::size_t c, double scale = 3.0) {
    std::vector<double> v(c);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return v;
}

inline ProbDist random_dist(Rng& rng, std::size_t c) { return softmax(random_logits(rng, c)); }

// Straight transcription of the smoothed KL sum, kept apart from the library.
inline double ref_kl(std::span<const double> q, std::span<const double> p, double eps) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * std::log((q[j] + eps) / (p[j] + eps));
    return s;
}

inline std::vector<double> ref_softmax(const std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> out(z.size());
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) s += out[j] = std::exp(z[j] - mx);
    for (double& v : out) v /= s;
    return out;
}

// Well-separated synthetic classification data with clean labels.
inline Dataset blobs(std::size_t n, std::size_t classes, std::size_t features, double sep,
                     std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.task = TaskKind::synthetic;
    d.num_features = features;
    d.num_classes = classes;
    for (std::size_t i = 0; i < n; ++i) {
        Example e;
        e.id = i;
        e.group = i;
        e.label = static_cast<int>(i % classes);
        e.features.resize(features);
        for (std::size_t f = 0; f < features; ++f) {
            e.features[f] = 0.3 * rng.normal() + (f % classes == static_cast<std::size_t>(e.label) ? sep : 0.0);
        }
        d.examples.push_back(std::move(e));
    }
    return d;
}

// Reference BIO decoder: position i opens a span when its tag is B-X, or I-X
// without an I-X/B-X of the same type right before it. The span then absorbs
// the following I-X tags.
inline std::vector<Span> ref_bio_decode(const std::vector<std::string>& tags) {
    auto type_of = [](const std::string& t) { return t.size() > 2 ? t.substr(2) : std::string(); };
    std::vector<Span> out;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == "O") continue;
        const std::string type = type_of(tags[i]);
        const bool continues = tags[i][0] == 'I' && i > 0 && tags[i - 1] != "O" && type_of(tags[i - 1]) == type;
        if (continues) continue;
        std::size_t end = i;
        while (end + 1 < tags.size() && tags[end + 1] == "I-" + type) ++end;
        out.push_back(Span{type, i, end});
    }
    return out;
}

// Every tag sequence of the given length over the tag alphabet.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t length) {
    std::vector<std::vector<std::string>> out{{}};
    for (std::size_t l = 0; l < length; ++l) {
        std::vector<std::vector<std::string>> next;
        for (const auto& prefix : out) {
            for (const auto& t : alphabet) {
                next.push_back(prefix);
                next.back().push_back(t);
            }
        }
        out = std::move(next);
    }
    return out;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline std::vector<double> flat(const ModelEnsemble& e) {
    std::vector<double> out;
    for (const auto& m : e.models) out.insert(out.end(), m.params().begin(), m.params().end());
    return out;
}

// Independent joint-loss evaluation over a concatenated parameter vector.
struct JointOracle {
    const ModelEnsemble* shape;
    const Batch* batch;
    TrainConfig cfg;
    std::vector<std::vector<double>> frozen_q;  // empty: recompute q from params

    std::vector<std::vector<std::vector<double>>> probs(std::span<const double> w,
                                                        std::vector<std::vector<std::vector<double>>>* logits) const {
        std::vector<std::vector<std::vector<double>>> p;
        std::size_t off = 0;
        for (const auto& model : shape->models) {
            MlpModel probe = model;
            std::copy(w.begin() + off, w.begin() + off + model.num_params(), probe.mutable_params().begin());
            off += model.num_params();
            p.emplace_back();
            if (logits) logits->emplace_back();
            for (std::size_t i = 0; i < batch->size(); ++i) {
                auto z = predict_logits(probe, batch->features[i]);
                p.back().push_back(ref_softmax(z));
                if (logits) logits->back().push_back(std::move(z));
            }
        }
        return p;
    }

    static double sup(const std::vector<double>& p, int y) { return -std::log(std::max(p[y], 1e-12)); }

    std::vector<std::vector<double>> targets(std::span<const double> w) const {
        std::vector<std::vector<std::vector<double>>> z;
        const auto p = probs(w, &z);
        const std::size_t m = p.size(), n = batch->size(), c = p[0][0].size();
        std::vector<std::vector<double>> q(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.aggregate == AggregateMode::avg_prob) {
                q[i].assign(c, 0.0);
                for (std::size_t k = 0; k < m; ++k)
                    for (std::size_t j = 0; j < c; ++j) q[i][j] += p[k][i][j] / static_cast<double>(m);
            } else if (cfg.aggregate == AggregateMode::avg_logit) {
                std::vector<double> mean(c, 0.0);
                for (std::size_t k = 0; k < m; ++k)
                    for (std::size_t j = 0; j < c; ++j) mean[j] += z[k][i][j] / static_cast<double>(m);
                q[i] = ref_softmax(mean);
            } else {
                std::size_t best = 0;
                for (std::size_t k = 1; k < m; ++k)
                    if (sup(p[k][i], batch->labels[i]) > sup(p[best][i], batch->labels[i])) best = k;
                q[i] = p[best][i];
            }
        }
        return q;
    }

    double operator()(std::span<const double> w) const {
        const auto p = probs(w, nullptr);
        const auto q = frozen_q.empty() ? targets(w) : frozen_q;
        const std::size_t m = p.size(), n = batch->size();
        double task = 0.0, agg = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                task += batch->weights[i] * sup(p[k][i], batch->labels[i]);
                agg += ref_kl(q[i], p[k][i], cfg.kl_eps);
            }
        }
        const double mn = static_cast<double>(m * n);
        return task / mn + cfg.gamma * agg / mn;
    }
};

inline double vector_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den = std::max({den, a[i] * a[i], b[i] * b[i]});
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

} // namespace coreg::testing
