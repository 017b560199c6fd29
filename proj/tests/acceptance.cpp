// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "support.hpp"

#include "coreg/baselines.hpp"
#include "coreg/experiment.hpp"
#include "coreg/noise_lab.hpp"

using namespace coreg;
using namespace coreg::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream row(line);
        for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Desk-scale synthetic setup shared by the behavioral criteria.
ExperimentConfig desk_config(const fs::path& out) {
    ExperimentConfig c = default_config(TaskKind::synthetic);
    c.train.num_models = 2;
    c.train.gamma = 5.0;
    c.train.warmup_pct = 30.0;
    c.train.epochs = 30;
    c.train.keep_best_checkpoint = false;
    c.noise = NoiseSpec{};
    c.noise->rate = 0.3;
    c.noise->scheme = NoiseScheme::uniform_flip;
    c.seeds = {1, 2, 3, 4, 5};
    c.output_dir = out;
    return c;
}

TrainConfig random_small_config(Rng& rng) {
    TrainConfig cfg;
    cfg.num_models = 2 + rng.below(3);
    cfg.hidden_sizes = {2 + rng.below(5)};
    cfg.dropout = 0.0;
    cfg.gamma = rng.uniform(0.1, 10.0);
    cfg.warmup_pct = 0.0;
    cfg.aggregate = static_cast<AggregateMode>(rng.below(3));
    cfg.master_seed = rng.next_u64();
    return cfg;
}

Outcome agreement_exactness() {
    const auto start = Clock::now();
    Rng rng(1001);
    double worst_diff = 0.0, min_value = 1e300, worst_identical = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        TrainConfig cfg = random_small_config(rng);
        const std::size_t classes = 2 + rng.below(5), n = 1 + rng.below(12), features = 1 + rng.below(4);
        const auto data = blobs(n, classes, features, rng.uniform(0.0, 2.0), rng.next_u64());
        auto ens = make_ensemble(cfg, features, classes);
        for (auto& m : ens.models)
            for (double& w : m.mutable_params()) w += 0.5 * rng.normal();
        const auto batch = make_batch(data, iota(n));

        JointOracle oracle{&ens, &batch, cfg, {}};
        const auto w = flat(ens);
        const auto q = oracle.targets(w);
        const auto p = oracle.probs(w, nullptr);
        double direct = 0.0;
        for (std::size_t k = 0; k < cfg.num_models; ++k)
            for (std::size_t i = 0; i < n; ++i) direct += ref_kl(q[i], p[k][i], cfg.kl_eps);
        direct /= static_cast<double>(cfg.num_models * n);

        auto copy = ens;
        const double trainer = step_gradients(batch, copy, 0, 1, cfg).report.agreement_loss;
        worst_diff = std::max(worst_diff, std::abs(trainer - direct));
        min_value = std::min(min_value, trainer);

        // All models share model 0's parameters: predictions coincide.
        auto same = ens;
        for (auto& m : same.models) {
            auto src = ens.models[0].params();
            std::copy(src.begin(), src.end(), m.mutable_params().begin());
        }
        const double agg_same = step_gradients(batch, same, 0, 1, cfg).report.agreement_loss;
        worst_identical = std::max(worst_identical, std::abs(agg_same));
    }
    const double secs = seconds_since(start);
    const bool pass = worst_diff <= 1e-10 && min_value >= -10 * kDefaultKlEps && worst_identical < 1e-12 && secs < 5.0;
    return {pass, "max |trainer - direct| = " + num(worst_diff) + ", min L_agg = " + num(min_value) +
                      ", max L_agg with identical predictions = " + num(worst_identical) + ", " + num(secs, 3) +
                      " s"};
}

Outcome gradient_fidelity() {
    const auto start = Clock::now();
    Rng rng(2002);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        TrainConfig cfg = random_small_config(rng);
        const std::size_t depth = rng.below(3);
        cfg.hidden_sizes.clear();
        for (std::size_t d = 0; d < depth; ++d) cfg.hidden_sizes.push_back(2 + rng.below(4));
        const std::size_t classes = 2 + rng.below(4), n = 1 + rng.below(6), features = 1 + rng.below(4);
        const auto data = blobs(n, classes, features, 0.5, rng.next_u64());
        auto ens = make_ensemble(cfg, features, classes);
        for (auto& m : ens.models)
            for (double& w : m.mutable_params()) w += 0.2 * rng.normal();
        const auto batch = make_batch(data, iota(n));

        auto copy = ens;
        const auto step = step_gradients(batch, copy, 0, 1, cfg);
        std::vector<double> analytic;
        for (const auto& g : step.grads) analytic.insert(analytic.end(), g.begin(), g.end());
        JointOracle oracle{&ens, &batch, cfg, {}};
        const auto w0 = flat(ens);
        oracle.frozen_q = oracle.targets(w0);
        const auto numeric = finite_diff_grad(std::cref(oracle), w0, 1e-5);
        worst = std::max(worst, vector_rel_err(analytic, numeric));
    }
    const double secs = seconds_since(start);
    return {worst < 1e-4 && secs < 30.0, "worst relative error " + num(worst) + " over 100 nets, " + num(secs, 3) + " s"};
}

Outcome aggregate_semantics() {
    Rng rng(3003);
    double worst = 0.0;
    std::size_t min_prob_errors = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t m = 2 + rng.below(3), c = 2 + rng.below(5);
        std::vector<std::vector<double>> z;
        std::vector<ProbDist> p;
        std::vector<double> loss(m);
        for (std::size_t k = 0; k < m; ++k) {
            z.push_back(random_logits(rng, c));
            p.push_back(softmax(z.back()));
            loss[k] = static_cast<double>(rng.below(4));  // frequent ties
        }
        const auto avg = aggregate_soft_target(p, z, loss, AggregateMode::avg_prob);
        const auto al = aggregate_soft_target(p, z, loss, AggregateMode::avg_logit);
        const auto mp = aggregate_soft_target(p, z, loss, AggregateMode::min_prob);
        std::vector<double> mean_z(c, 0.0);
        for (std::size_t j = 0; j < c; ++j) {
            double mean_p = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                mean_p += p[k][j] / static_cast<double>(m);
                mean_z[j] += z[k][j] / static_cast<double>(m);
            }
            worst = std::max(worst, std::abs(avg[j] - mean_p));
        }
        const auto ref = ref_softmax(mean_z);
        for (std::size_t j = 0; j < c; ++j) worst = std::max(worst, std::abs(al[j] - ref[j]));
        std::size_t star = 0;
        for (std::size_t k = 0; k < m; ++k)
            if (loss[k] > loss[star]) star = k;
        min_prob_errors += !(mp == p[star]);

        // Fixed point: coinciding predictions.
        const std::vector<std::vector<double>> zs(m, z[0]);
        const std::vector<ProbDist> ps(m, p[0]);
        for (auto mode : {AggregateMode::avg_prob, AggregateMode::avg_logit, AggregateMode::min_prob}) {
            const auto q = aggregate_soft_target(ps, zs, loss, mode);
            for (std::size_t j = 0; j < c; ++j) worst = std::max(worst, std::abs(q[j] - p[0][j]));
        }
    }
    return {worst < 1e-12 && min_prob_errors == 0,
            "max deviation " + num(worst) + ", min_prob mismatches " + std::to_string(min_prob_errors)};
}

Outcome schedule_exactness() {
    std::size_t errors = 0;
    const std::size_t T = 1000;
    for (double d : {2.0, 5.0, 8.0}) {
        const PruneSchedule s{d, T};
        for (std::size_t t : {std::size_t{0}, T / 4, T / 2, T}) errors += schedule_delta(s, t) != d * static_cast<double>(t) / static_cast<double>(T);
        errors += schedule_delta(s, T / 2) != d / 2;
    }
    const auto data = blobs(6, 3, 2, 1.0, 4);
    const auto batch = make_batch(data, iota(6));
    for (std::size_t total : {std::size_t{1000}, std::size_t{997}, std::size_t{33}}) {
        for (int alpha : {10, 30, 50, 70, 90}) {
            TrainConfig cfg;
            cfg.hidden_sizes = {3};
            cfg.dropout = 0.0;
            cfg.gamma = 4.0;
            cfg.warmup_pct = alpha;
            TrainConfig plain = cfg;
            plain.gamma = 0.0;
            const std::size_t boundary = (static_cast<std::size_t>(alpha) * total + 99) / 100;
            errors += warmup_steps(cfg, total) != boundary;
            const auto ens = make_ensemble(cfg, 2, 3);
            auto a = ens, b = ens, c = ens, d = ens;
            const auto before = step_gradients(batch, a, boundary - 1, total, cfg);
            const auto before_plain = step_gradients(batch, b, boundary - 1, total, plain);
            const auto after = step_gradients(batch, c, boundary, total, cfg);
            const auto after_plain = step_gradients(batch, d, boundary, total, plain);
            errors += !before.report.warmup || after.report.warmup;
            errors += before.grads != before_plain.grads;
            errors += after.grads == after_plain.grads;
        }
    }
    return {errors == 0, std::to_string(errors) + " mismatches over the delta grid and 15 warm-up boundaries"};
}

Outcome denoising_effect() {
    const auto start = Clock::now();
    const auto cfg = desk_config("unused");
    std::vector<double> coreg_acc, plain_acc;
    for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.master_seed = seed;
        const auto data = build_task_data(cfg, seed);
        const auto co = train(data.train, nullptr, tc);
        const auto pl = train_plain(data.train, nullptr, tc);
        coreg_acc.push_back(evaluate(co.ensemble.models[0], data.test).f1);
        plain_acc.push_back(evaluate(pl.ensemble.models[0], data.test).f1);
    }
    const double secs = seconds_since(start);
    const double mc = median(coreg_acc), mp = median(plain_acc);
    const double margin = 100.0 * (mc - mp);
    return {margin >= 2.0 && secs < 60.0, "median clean-test accuracy coreg " + num(mc) + " vs plain " + num(mp) +
                                              " (+" + num(margin, 3) + " pp), " + num(secs, 3) + " s"};
}

Outcome noise_overfit(const fs::path& tmp) {
    auto cfg = desk_config(tmp / "analyze");
    cfg.noise.reset();
    cfg.analysis.gammas = {0.0, 1.0, 5.0, 20.0};
    cfg.analysis.pool_size = 1000;
    cfg.analysis.pool_noise_rate = 0.5;
    const auto m = run_noise_analysis(cfg);
    if (m.failed) return {false, "analyze-noise failed: " + m.error};
    // seed -> gamma -> per-epoch clean F1
    std::map<std::string, std::map<double, std::vector<double>>> curves;
    for (const auto& r : read_csv(tmp / "analyze" / "analysis_curves.csv")) {
        curves[r[2]][std::stod(r[1])].push_back(std::stod(r[6]));
    }
    int robust = 0, rise_fall = 0;
    for (auto& [seed, by_gamma] : curves) {
        const auto& base = by_gamma.at(0.0);
        const double base_peak = *std::max_element(base.begin(), base.end());
        bool better = false;
        for (const auto& [g, c] : by_gamma)
            if (g > 0 && *std::max_element(c.begin(), c.end()) > base_peak) better = true;
        robust += better;
        rise_fall += base_peak > base.back();
    }
    return {robust >= 4 && rise_fall >= 4, "gamma>0 beats gamma=0 peak in " + std::to_string(robust) +
                                              "/5 seeds; gamma=0 peak exceeds final in " + std::to_string(rise_fall) + "/5"};
}

Outcome memorization_delay() {
    const auto cfg = desk_config("unused");
    int delayed = 0;
    std::string detail;
    for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.master_seed = seed;
        const auto data = build_task_data(cfg, seed);
        TrajectoryRecorder rec(data.train);
        train_plain(data.train, nullptr, tc, nullptr, nullptr, std::ref(rec));
        const auto stats = forgetting_stats(rec.trajectories());
        double flipped = 0, clean = 0;
        std::size_t nf = 0, nc = 0;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            // Never-learned instances count as learned at the end of training.
            const double first = static_cast<double>(stats[i].first_learned_epoch.value_or(tc.epochs));
            if (data.train_flips->flipped[i]) flipped += first, ++nf;
            else clean += first, ++nc;
        }
        flipped /= static_cast<double>(nf);
        clean /= static_cast<double>(nc);
        delayed += flipped > clean;
        detail += (detail.empty() ? "" : "; ") + num(flipped, 3) + " vs " + num(clean, 3);
    }
    return {delayed >= 4, std::to_string(delayed) + "/5 seeds delayed (flipped vs clean mean first-learned epoch: " +
                              detail + ")"};
}

Outcome bio_metrics() {
    std::size_t mismatches = 0, checked = 0;
    const std::vector<std::string> alphabet{"O", "B-PER", "I-PER", "B-ORG", "I-ORG"};
    for (std::size_t len = 0; len <= 6; ++len) {
        for (const auto& seq : all_sequences(alphabet, len)) {
            mismatches += bio_decode(seq) != ref_bio_decode(seq);
            ++checked;
        }
    }
    bool examples = true;
    const std::vector<std::vector<Span>> gold{{{"PER", 0, 1}, {"ORG", 3, 3}}};
    const std::vector<std::vector<Span>> none{{}};
    const std::vector<std::vector<Span>> half{{{"PER", 0, 1}}};
    examples &= span_f1(gold, gold).f1 == 1.0;
    const auto e = span_f1(gold, none);
    examples &= e.precision == 0.0 && e.recall == 0.0 && e.f1 == 0.0;
    const auto h = span_f1(gold, half);
    examples &= h.precision == 1.0 && h.recall == 0.5 && std::abs(h.f1 - 2.0 / 3.0) < 1e-15;
    const std::vector<int> neg{0, 0, 0};
    const auto z = relation_micro_f1(neg, neg, 0);
    examples &= z.tp == 0 && z.fp == 0 && z.fn == 0 && z.f1 == 0.0;
    const auto r = relation_micro_f1(std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 1}, 0);
    examples &= r.tp == 1 && r.fp == 1 && r.fn == 1 && r.f1 == 0.5;
    const std::vector<int> g{1, 2, 0};
    examples &= relation_micro_f1(g, g, 0).f1 == 1.0;
    return {mismatches == 0 && examples, std::to_string(checked) + " sequences, " + std::to_string(mismatches) +
                                             " decoder mismatches, worked examples " + (examples ? "match" : "differ")};
}

Outcome audit_utility(const fs::path& tmp) {
    const auto cfg = desk_config(tmp / "audit");
    const auto m = run_label_audit(cfg);
    if (m.failed) return {false, "audit-labels failed: " + m.error};
    std::vector<double> aucs;
    for (const auto& r : read_csv(tmp / "audit" / "audit_summary.csv")) aucs.push_back(std::stod(r.back()));
    const double worst = *std::min_element(aucs.begin(), aucs.end());
    std::string all;
    for (double a : aucs) all += (all.empty() ? "" : ", ") + num(a);
    return {aucs.size() == 5 && worst > 0.8, "AUROC per seed: " + all};
}

int cli(const std::string& args) {
    const std::string cmd = std::string(COREG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const fs::path& tmp) {
    const fs::path cfg_path = tmp / "det.json";
    std::ofstream(cfg_path) << R"({
  "task": "synthetic", "method": "coreg", "seeds": [1, 2],
  "synthetic": {"kind": "gaussian", "num_train": 300, "num_dev": 100, "num_test": 100},
  "train": {"models": 2, "epochs": 5, "gamma": 5, "alpha": 30, "dropout": 0.1, "checkpoint": "best_dev"},
  "noise": {"rate": 0.3},
  "analysis": {"gammas": [0, 5], "pool_size": 100, "pool_noise_rate": 0.5}
})";
    std::vector<std::string> compared, differing, failed;
    for (int run = 0; run < 2; ++run) {
        const fs::path d = tmp / ("det" + std::to_string(run));
        const std::string o = d.string();
        const std::vector<std::string> commands{
            "gen-synthetic -o " + o + "/gen --seed 7 --train 200 --dev 50 --test 50",
            "inject-noise -i " + o + "/gen/train.csv -o " + o + "/noisy.csv --mask " + o + "/mask.csv --rate 0.3 --seed 3",
            "train -c " + cfg_path.string() + " -o " + o + "/train",
            "evaluate -p " + o + "/train/predictions_seed1.csv -o " + o + "/eval.csv",
            "analyze-noise -c " + cfg_path.string() + " -o " + o + "/analyze",
            "audit-labels -c " + cfg_path.string() + " -o " + o + "/audit",
            "export-curves -r " + o + "/train -o " + o + "/exported.csv",
        };
        for (const auto& c : commands)
            if (cli(c) != 0 && run == 0) failed.push_back(c.substr(0, c.find(' ')));
    }
    for (const char* f : {"gen/train.csv", "gen/test.csv", "noisy.csv", "mask.csv", "train/metrics.csv",
                          "train/curves.csv", "eval.csv", "analyze/analysis_summary.csv",
                          "analyze/analysis_curves.csv", "audit/audit_summary.csv", "audit/suspects_seed1.csv",
                          "exported.csv"}) {
        const fs::path a = tmp / "det0" / f, b = tmp / "det1" / f;
        compared.push_back(f);
        if (!fs::exists(a) || slurp(a) != slurp(b)) differing.push_back(f);
    }
    std::string detail = std::to_string(compared.size()) + " CSV outputs from 7 subcommands compared, " +
                         std::to_string(differing.size()) + " differ";
    for (const auto& f : differing) detail += " " + f;
    for (const auto& f : failed) detail += "; subcommand failed: " + f;
    return {differing.empty() && failed.empty(), detail};
}

} // namespace

int main() {
    const fs::path tmp = fs::temp_directory_path() / ("coreg_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(tmp);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"agreement-loss exactness", agreement_exactness},
        {"gradient fidelity", gradient_fidelity},
        {"aggregate semantics", aggregate_semantics},
        {"schedule exactness", schedule_exactness},
        {"desk-scale denoising effect", denoising_effect},
        {"noise-overfit protocol", [&] { return noise_overfit(tmp); }},
        {"memorization delay", memorization_delay},
        {"BIO and metric oracles", bio_metrics},
        {"noise-detection utility", [&] { return audit_utility(tmp); }},
        {"determinism", [&] { return determinism(tmp); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    fs::remove_all(tmp);
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
