#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "support.hpp"

#include "coreg/error.hpp"
#include "coreg/trainer.hpp"

using namespace coreg;
using namespace coreg::testing;

namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.hidden_sizes = {6};
    c.dropout = 0.0;
    c.base_lr = 0.01;
    c.batch_size = 8;
    c.epochs = 3;
    c.gamma = 2.0;
    c.warmup_pct = 30.0;
    c.keep_best_checkpoint = false;
    return c;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

} // namespace

TEST_CASE("aggregate soft targets") {
    const std::vector<ProbDist> two{ProbDist({0.8, 0.2}), ProbDist({0.4, 0.6})};
    const std::vector<std::vector<double>> no_logits{{0.0, 0.0}, {0.0, 0.0}};
    const std::vector<double> losses{0.2, 0.9};
    const auto avg = aggregate_soft_target(two, no_logits, losses, AggregateMode::avg_prob);
    CHECK(std::abs(avg[0] - 0.6) < 1e-15);
    CHECK(std::abs(avg[1] - 0.4) < 1e-15);

    const std::vector<std::vector<double>> logits{{1.0, 0.0}, {3.0, 2.0}};
    const std::vector<ProbDist> from_logits{softmax(logits[0]), softmax(logits[1])};
    const auto al = aggregate_soft_target(from_logits, logits, losses, AggregateMode::avg_logit);
    // mpmath: softmax([2, 1]).
    CHECK(std::abs(al[0] - 0.731058578630005) < 1e-14);
    CHECK(std::abs(al[1] - 0.268941421369995) < 1e-14);

    CHECK(aggregate_soft_target(two, no_logits, losses, AggregateMode::min_prob) == two[1]);
    const std::vector<double> tied{0.5, 0.5};
    CHECK(aggregate_soft_target(two, no_logits, tied, AggregateMode::min_prob) == two[0]);

    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 2 + rng.below(3), c = 2 + rng.below(4);
        const auto z = random_logits(rng, c);
        const std::vector<std::vector<double>> zs(m, z);
        const std::vector<ProbDist> ps(m, softmax(z));
        std::vector<double> l(m);
        for (double& v : l) v = rng.uniform();
        for (auto mode : {AggregateMode::avg_prob, AggregateMode::avg_logit, AggregateMode::min_prob}) {
            const auto q = aggregate_soft_target(ps, zs, l, mode);
            for (std::size_t j = 0; j < c; ++j) CHECK(std::abs(q[j] - ps[0][j]) < 1e-15);
        }
    }
}

TEST_CASE("aggregate rejects inconsistent input") {
    const std::vector<ProbDist> two{ProbDist({0.5, 0.5}), ProbDist({0.5, 0.5})};
    const std::vector<std::vector<double>> z{{0.0, 0.0}};
    CHECK_THROWS_AS(aggregate_soft_target(two, z, std::vector<double>{0.1, 0.2}, AggregateMode::avg_logit), Error);
    CHECK_THROWS_AS(aggregate_soft_target(two, z, std::vector<double>{0.1}, AggregateMode::min_prob), Error);
    const std::vector<ProbDist> mixed{ProbDist({0.5, 0.5}), ProbDist({0.2, 0.3, 0.5})};
    const std::vector<std::vector<double>> z2{{0.0, 0.0}, {0.0, 0.0, 0.0}};
    CHECK_THROWS_AS(aggregate_soft_target(mixed, z2, std::vector<double>{0.1, 0.2}, AggregateMode::avg_prob), Error);
}

TEST_CASE("agreement loss values") {
    const std::vector<ProbDist> q{ProbDist({0.5, 0.5})};
    const std::vector<std::vector<ProbDist>> preds{{ProbDist({0.6, 0.4})}, {ProbDist({0.4, 0.6})}};
    // mpmath oracle, mean of the two symmetric KL terms.
    CHECK(std::abs(agreement_loss(q, preds, 1e-12) - 0.0204109972600442) < 1e-13);

    const std::vector<ProbDist> q2{q[0], q[0]};
    const std::vector<std::vector<ProbDist>> doubled{{preds[0][0], preds[0][0]}, {preds[1][0], preds[1][0]}};
    CHECK(agreement_loss(q2, doubled, 1e-12) == doctest::Approx(agreement_loss(q, preds, 1e-12)).epsilon(1e-15));

    const std::vector<std::vector<ProbDist>> same{{ProbDist({0.3, 0.7})}, {ProbDist({0.3, 0.7})}};
    const std::vector<ProbDist> qs{ProbDist({0.3, 0.7})};
    CHECK(agreement_loss(qs, same, 1e-12) == 0.0);

    const std::vector<std::vector<ProbDist>> ragged{{preds[0][0]}, {}};
    CHECK_THROWS_AS(agreement_loss(q, ragged, 1e-12), Error);
}

TEST_CASE("warm-up length") {
    TrainConfig c;
    for (double alpha : {10.0, 30.0, 50.0, 70.0, 90.0}) {
        c.warmup_pct = alpha;
        CHECK(warmup_steps(c, 1000) == static_cast<std::size_t>(alpha * 10));
        CHECK(warmup_steps(c, 7) == static_cast<std::size_t>(std::ceil(alpha / 100.0 * 7)));
    }
}

TEST_CASE("joint loss gradient matches finite differences") {
    Rng rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        TrainConfig cfg = small_config();
        cfg.num_models = 2 + rng.below(3);
        cfg.hidden_sizes = {2 + rng.below(4)};
        cfg.gamma = rng.uniform(0.5, 5.0);
        cfg.warmup_pct = 0.0;
        cfg.aggregate = static_cast<AggregateMode>(trial % 3);
        cfg.master_seed = rng.next_u64();
        const std::size_t classes = 2 + rng.below(3);
        const auto data = blobs(5, classes, 3, 0.5, rng.next_u64());
        auto ens = make_ensemble(cfg, 3, classes);
        std::vector<double> weights(data.size());
        for (double& w : weights) w = rng.uniform(0.2, 1.0);
        const auto batch = make_batch(data, iota(data.size()), weights);

        for (bool through_q : {false, true}) {
            cfg.soft_target_gradient = through_q;
            auto copy = ens;
            const auto step = step_gradients(batch, copy, 0, 10, cfg);
            std::vector<double> analytic;
            for (const auto& g : step.grads) analytic.insert(analytic.end(), g.begin(), g.end());

            JointOracle oracle{&ens, &batch, cfg, {}};
            const auto w0 = flat(ens);
            if (!through_q) oracle.frozen_q = oracle.targets(w0);
            CHECK(std::abs(oracle(w0) - step.report.joint_loss) < 1e-12);
            const auto numeric = finite_diff_grad(std::cref(oracle), w0, 1e-5);
            CHECK(vector_rel_err(analytic, numeric) < 1e-4);
        }
    }
}

TEST_CASE("warm-up guard") {
    TrainConfig cfg = small_config();
    cfg.warmup_pct = 30.0;  // 3 of 10 steps
    const auto data = blobs(8, 3, 4, 0.5, 3);
    const auto batch = make_batch(data, iota(8));
    const auto ens = make_ensemble(cfg, 4, 3);

    TrainConfig plain = cfg;
    plain.gamma = 0.0;

    auto a = ens, b = ens;
    const auto last_warm = step_gradients(batch, a, 2, 10, cfg);
    const auto last_warm_plain = step_gradients(batch, b, 2, 10, plain);
    CHECK(last_warm.report.warmup);
    CHECK(last_warm.report.agreement_loss > 0.0);
    CHECK(last_warm.grads == last_warm_plain.grads);

    auto c = ens, d = ens;
    const auto first_joint = step_gradients(batch, c, 3, 10, cfg);
    const auto first_joint_plain = step_gradients(batch, d, 3, 10, plain);
    CHECK_FALSE(first_joint.report.warmup);
    CHECK(first_joint.grads != first_joint_plain.grads);
    CHECK(first_joint.report.joint_loss ==
          doctest::Approx(first_joint.report.task_loss + cfg.gamma * first_joint.report.agreement_loss));
}

TEST_CASE("gamma zero after warm-up equals warm-up update") {
    TrainConfig cfg = small_config();
    cfg.gamma = 0.0;
    cfg.warmup_pct = 0.0;
    TrainConfig warm = cfg;
    warm.warmup_pct = 100.0;
    const auto data = blobs(8, 3, 4, 0.5, 3);
    const auto batch = make_batch(data, iota(8));
    auto a = make_ensemble(cfg, 4, 3);
    auto b = a;
    train_step(batch, a, 5, 10, cfg);
    train_step(batch, b, 5, 10, warm);
    CHECK(flat(a) == flat(b));
}

TEST_CASE("full warm-up is plain averaged training") {
    const auto data = blobs(40, 3, 4, 1.0, 9);
    TrainConfig cfg = small_config();
    cfg.gamma = 5.0;
    cfg.warmup_pct = 100.0;
    TrainConfig plain = cfg;
    plain.gamma = 0.0;
    plain.warmup_pct = 0.0;
    const auto r1 = train(data, nullptr, cfg);
    const auto r2 = train(data, nullptr, plain);
    CHECK(flat(r1.ensemble) == flat(r2.ensemble));
    for (const auto& s : r1.steps) CHECK(s.warmup);
}

TEST_CASE("training is deterministic") {
    const auto data = blobs(50, 3, 4, 1.0, 2);
    TrainConfig cfg = small_config();
    cfg.dropout = 0.2;
    const auto r1 = train(data, &data, cfg);
    const auto r2 = train(data, &data, cfg);
    CHECK(r1.steps == r2.steps);
    CHECK(flat(r1.ensemble) == flat(r2.ensemble));
    cfg.master_seed = 2;
    CHECK(train(data, &data, cfg).steps != r1.steps);
}

TEST_CASE("zero steps return the initial ensemble") {
    const auto data = blobs(20, 2, 3, 1.0, 2);
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    const auto r = train(data, nullptr, cfg);
    CHECK(r.total_steps == 0);
    CHECK(r.steps.empty());
    CHECK(flat(r.ensemble) == flat(make_ensemble(cfg, 3, 2)));
}

TEST_CASE("separable data converges") {
    const auto data = blobs(200, 2, 4, 2.0, 5);
    TrainConfig cfg = small_config();
    cfg.hidden_sizes = {16};
    cfg.batch_size = 32;
    cfg.epochs = 150;
    cfg.gamma = 1.0;
    const auto r = train(data, nullptr, cfg);
    double agg = 0.0;
    for (const auto& e : data.examples) {
        const auto preds = ensemble_predictions(r.ensemble, e.features);
        for (const auto& p : preds) CHECK(static_cast<int>(p.argmax()) == e.label);
        std::vector<std::vector<double>> z;
        ensemble_predictions(r.ensemble, e.features, &z);
        const auto q = aggregate_soft_target(preds, z, std::vector<double>(preds.size(), 0.0), cfg.aggregate);
        for (const auto& p : preds) agg += kl_divergence(q, p, cfg.kl_eps);
    }
    CHECK(agg / (2.0 * static_cast<double>(data.size())) < 1e-3);
}

TEST_CASE("model selection") {
    CHECK(select_model(std::vector<double>{0.1, 0.9}, SelectionPolicy::first) == 0);
    CHECK(select_model(std::vector<double>{0.7, 0.9}, SelectionPolicy::best_dev) == 1);
    CHECK(select_model(std::vector<double>{0.8, 0.8}, SelectionPolicy::best_dev) == 0);
}

TEST_CASE("training errors") {
    const auto data = blobs(20, 2, 3, 1.0, 2);
    TrainConfig cfg = small_config();
    cfg.selection = SelectionPolicy::best_dev;
    CHECK_THROWS_AS(train(data, nullptr, cfg), ConfigError);
    Dataset empty_dev = data.subset(std::vector<std::size_t>{});
    CHECK_THROWS_AS(train(data, &empty_dev, cfg), ConfigError);

    cfg.selection = SelectionPolicy::first;
    cfg.num_models = 1;
    CHECK_THROWS_AS(train(data, nullptr, cfg), ConfigError);
    cfg.num_models = 2;
    CHECK_THROWS_AS(train(empty_dev, nullptr, cfg), DataError);

    auto bad = data;
    bad.examples[3].features[0] = std::nan("");
    CHECK_THROWS_AS(train(bad, nullptr, cfg), DivergenceError);

    for (auto mutate : std::vector<void (*)(TrainConfig&)>{
             [](TrainConfig& c) { c.warmup_pct = 120; }, [](TrainConfig& c) { c.gamma = -1; },
             [](TrainConfig& c) { c.batch_size = 0; }, [](TrainConfig& c) { c.dropout = 1.0; },
             [](TrainConfig& c) { c.kl_eps = 0.0; }}) {
        TrainConfig c = small_config();
        mutate(c);
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    CHECK_THROWS_AS(parse_aggregate("median"), ConfigError);
}

TEST_CASE("best-dev checkpoint and per-model curves") {
    const auto data = blobs(60, 3, 4, 1.0, 8);
    const auto dev = blobs(30, 3, 4, 1.0, 18);
    TrainConfig cfg = small_config();
    cfg.keep_best_checkpoint = true;
    cfg.selection = SelectionPolicy::best_dev;
    const auto r = train(data, &dev, cfg);
    REQUIRE(r.epochs.size() == cfg.epochs);
    for (const auto& e : r.epochs) CHECK(e.dev_f1.size() == cfg.num_models);
    const auto& best = r.epochs[r.checkpoint_epoch];
    CHECK(r.selected_model == select_model(best.dev_f1, cfg.selection));
    CHECK(evaluate_models(r.ensemble, dev) == best.dev_f1);
}
