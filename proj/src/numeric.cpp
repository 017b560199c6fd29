#include "coreg/numeric.hpp"

#include <cmath>
#include <string>

#include "coreg/error.hpp"

namespace coreg {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw Error("Tensor2: data length " + std::to_string(data_.size()) + " != " +
                    std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

bool Tensor2::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool is_valid_distribution(std::span<const double> probs, double tol) {
    if (probs.empty()) return false;
    double total = 0.0;
    for (double v : probs) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
        total += v;
    }
    return std::abs(total - 1.0) <= tol;
}

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (!is_valid_distribution(probs_)) throw Error("ProbDist: not a valid distribution");
}

std::size_t ProbDist::argmax() const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs_.size(); ++j) {
        if (probs_[j] > probs_[best]) best = j;
    }
    return best;
}

ProbDist softmax(std::span<const double> logits) {
    if (logits.size() < 2) throw Error("softmax: need at least 2 classes");
    double hi = logits[0];
    for (double l : logits) {
        if (!std::isfinite(l)) throw Error("non-finite logits");
        if (l > hi) hi = l;
    }
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - hi);
        total += out[j];
    }
    for (double& v : out) v /= total;
    return ProbDist(std::move(out));
}

double cross_entropy(std::span<const ProbDist> probs, std::span<const int> labels,
                     double eps_log) {
    if (probs.empty()) throw Error("cross_entropy: empty batch");
    if (probs.size() != labels.size()) throw Error("cross_entropy: batch/label length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs[i].size()) {
            throw Error("cross_entropy: label " + std::to_string(y) + " out of range");
        }
        total += -std::log(std::max(probs[i][static_cast<std::size_t>(y)], eps_log));
    }
    return total / static_cast<double>(probs.size());
}

double kl_divergence(const ProbDist& q, const ProbDist& p, double eps) {
    if (q.size() != p.size()) throw Error("kl_divergence: length mismatch");
    if (!(eps > 0.0)) throw Error("kl_divergence: eps must be positive");
    double total = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        total += q[j] * std::log((q[j] + eps) / (p[j] + eps));
    }
    return total;
}

std::vector<double> cross_entropy_grad_logits(const ProbDist& p, int label, double eps_log) {
    std::vector<double> g(p.size(), 0.0);
    const auto y = static_cast<std::size_t>(label);
    if (label < 0 || y >= p.size()) throw Error("cross_entropy: label out of range");
    if (p[y] < eps_log) return g;
    for (std::size_t j = 0; j < p.size(); ++j) g[j] = p[j];
    g[y] -= 1.0;
    return g;
}

std::vector<double> softmax_vjp(const ProbDist& p, std::span<const double> upstream) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += upstream[j] * p[j];
    std::vector<double> g(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) g[j] = p[j] * (upstream[j] - dot);
    return g;
}

std::vector<double> kl_grad_logits(const ProbDist& q, const ProbDist& p, double eps) {
    if (q.size() != p.size()) throw Error("kl_divergence: length mismatch");
    // dKL/dp_j = -q_j / (p_j + eps)
    std::vector<double> up(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) up[j] = -q[j] / (p[j] + eps);
    return softmax_vjp(p, up);
}

std::vector<double> kl_grad_target(const ProbDist& q, const ProbDist& p, double eps) {
    if (q.size() != p.size()) throw Error("kl_divergence: length mismatch");
    std::vector<double> g(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) {
        g[j] = std::log((q[j] + eps) / (p[j] + eps)) + q[j] / (q[j] + eps);
    }
    return g;
}

double lr_at(const LrSchedule& schedule, std::size_t t) {
    if (t > schedule.total_steps) {
        throw Error("lr_at: step " + std::to_string(t) + " beyond total " +
                    std::to_string(schedule.total_steps));
    }
    if (schedule.total_steps == 0) return schedule.base_lr;
    const double frac = static_cast<double>(t) / static_cast<double>(schedule.total_steps);
    return schedule.base_lr * (1.0 - frac);
}

AdamState AdamState::fresh(std::size_t num_params) {
    AdamState s;
    s.first_moment.assign(num_params, 0.0);
    s.second_moment.assign(num_params, 0.0);
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw Error("adam_step: shape mismatch");
    }
    if (lr < 0.0) throw Error("adam_step: negative learning rate");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
        v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps_opt);
    }
}

std::vector<double> dropout_mask(std::size_t length, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout_mask: rate must be in [0,1)");
    std::vector<double> mask(length, 1.0);
    if (rate == 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
    return mask;
}

std::vector<double> finite_diff_grad(const ScalarFn& loss_fn, std::span<const double> params,
                                     double h) {
    if (!(h > 0.0)) throw Error("finite_diff_grad: h must be positive");
    std::vector<double> x(params.begin(), params.end());
    std::vector<double> grad(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double saved = x[j];
        x[j] = saved + h;
        const double up = loss_fn(x);
        x[j] = saved - h;
        const double down = loss_fn(x);
        x[j] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw Error("finite_diff_grad: non-finite evaluation at coordinate " +
                        std::to_string(j));
        }
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace coreg
