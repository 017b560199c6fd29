#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "coreg/rng.hpp"

namespace coreg {

/// Floor applied to probabilities before taking the log in cross-entropy.
inline constexpr double kLogFloor = 1e-12;
/// Default smoothing constant of the agreement KL divergence.
inline constexpr double kDefaultKlEps = 1e-12;

/// Dense row-major matrix of doubles.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return data_; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Probability distribution over C classes. Entries lie in [0,1] and sum to
/// one within 1e-9; the constructor enforces this.
class ProbDist {
public:
    ProbDist() = default;
    explicit ProbDist(std::vector<double> probs);

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t j) const { return probs_[j]; }
    std::span<const double> values() const { return probs_; }

    std::size_t argmax() const;

    friend bool operator==(const ProbDist&, const ProbDist&) = default;

private:
    std::vector<double> probs_;
};

bool is_valid_distribution(std::span<const double> probs, double tol = 1e-9);

/// Max-subtracted softmax. Throws on non-finite input or fewer than 2 classes.
ProbDist softmax(std::span<const double> logits);

/// Mean negative log-likelihood of the labels, with probabilities floored at
/// eps_log.
double cross_entropy(std::span<const ProbDist> probs, std::span<const int> labels,
                     double eps_log = kLogFloor);

/// Smoothed KL divergence sum_j q_j log((q_j + eps) / (p_j + eps)).
double kl_divergence(const ProbDist& q, const ProbDist& p, double eps = kDefaultKlEps);

/// d/dlogits of -log max(p_y, eps_log) where p = softmax(logits). Zero when
/// the floor is active.
std::vector<double> cross_entropy_grad_logits(const ProbDist& p, int label,
                                              double eps_log = kLogFloor);

/// d/dlogits of kl_divergence(q, softmax(logits)) with q held constant.
std::vector<double> kl_grad_logits(const ProbDist& q, const ProbDist& p, double eps);

/// d/dq of kl_divergence(q, p) with p held constant.
std::vector<double> kl_grad_target(const ProbDist& q, const ProbDist& p, double eps);

/// Vector-Jacobian product through softmax: given upstream dL/dp, returns dL/dlogits.
std::vector<double> softmax_vjp(const ProbDist& p, std::span<const double> upstream);

struct LrSchedule {
    double base_lr = 3e-5;
    std::size_t total_steps = 1;
};

/// Linear decay to zero: base_lr * (1 - t / total_steps).
double lr_at(const LrSchedule& schedule, std::size_t t);

struct AdamState {
    std::size_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;

    static AdamState fresh(std::size_t num_params);
};

/// One bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

/// Inverted-dropout mask: 0 with probability `rate`, else 1/(1-rate).
std::vector<double> dropout_mask(std::size_t length, double rate, Rng& rng);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central-difference gradient, used as a test oracle.
std::vector<double> finite_diff_grad(const ScalarFn& loss_fn, std::span<const double> params,
                                     double h);

} // namespace coreg
