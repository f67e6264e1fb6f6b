// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cdlab/rng.hpp"

namespace cdlab::tasks {

struct NoisyQuadraticSpec {
    std::int64_t dim = 100;
    double eigen_min = 0.01;
    double eigen_max = 1.0;
    double noise_scale = 0.3;

    friend bool operator==(const NoisyQuadraticSpec&, const NoisyQuadraticSpec&) = default;
};

struct SyntheticLmSpec {
    std::int64_t vocab = 64;
    std::int64_t context = 8;
    std::int64_t hidden = 32;
    std::uint64_t corpus_seed = 1;
    std::int64_t corpus_len = 30000;
    double holdout_fraction = 0.1;

    friend bool operator==(const SyntheticLmSpec&, const SyntheticLmSpec&) = default;
};

struct TaskSpec {
    std::variant<NoisyQuadraticSpec, SyntheticLmSpec> kind = NoisyQuadraticSpec{};
    std::uint64_t seed = 42;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// A differentiable training task. `stochastic_gradient` draws a minibatch
/// with the caller's generator, accumulates the averaged gradient into
/// `grad`, and returns the minibatch training loss. `eval_loss` is the
/// task's deterministic evaluation metric.
class Task {
public:
    virtual ~Task() = default;
    virtual std::int64_t dim() const = 0;
    virtual std::vector<double> initial_params(CounterRng& rng) const = 0;
    virtual double stochastic_gradient(std::span<const double> w, std::int64_t batch_size,
                                       CounterRng& rng, std::span<double> grad) const = 0;
    virtual double eval_loss(std::span<const double> w) const = 0;
};

/// loss(w) = 1/2 w^T H w with diagonal H log-spaced in [eigen_min, eigen_max].
/// Stochastic gradients are H w plus isotropic Gaussian noise whose scale
/// shrinks with the square root of the batch size; the evaluation loss is the
/// exact quadratic, so it is free of gradient noise by construction.
class NoisyQuadraticTask final : public Task {
public:
    explicit NoisyQuadraticTask(const NoisyQuadraticSpec& spec) : spec_(spec) {
        if (spec.dim < 1) throw std::domain_error("NoisyQuadratic: dim must be >= 1");
        if (!(spec.eigen_min > 0.0) || !(spec.eigen_max >= spec.eigen_min)) {
            throw std::domain_error("NoisyQuadratic: need 0 < eigen_min <= eigen_max");
        }
        if (spec.noise_scale < 0.0) {
            throw std::domain_error("NoisyQuadratic: noise_scale must be >= 0");
        }
        eigenvalues_.resize(spec.dim);
        const double log_min = std::log(spec.eigen_min);
        const double log_max = std::log(spec.eigen_max);
        for (std::int64_t i = 0; i < spec.dim; ++i) {
            const double t = spec.dim == 1
                                 ? 0.0
                                 : static_cast<double>(i) / static_cast<double>(spec.dim - 1);
            eigenvalues_[i] = std::exp(log_min + t * (log_max - log_min));
        }
    }

    std::int64_t dim() const override { return spec_.dim; }

    std::vector<double> initial_params(CounterRng& rng) const override {
        std::vector<double> w(spec_.dim);
        for (double& wi : w) wi = rng.next_normal();
        return w;
    }

    double stochastic_gradient(std::span<const double> w, std::int64_t batch_size,
                               CounterRng& rng, std::span<double> grad) const override {
        check_dim(w.size());
        check_dim(grad.size());
        if (batch_size < 1) throw std::domain_error("NoisyQuadratic: batch_size must be >= 1");
        // Averaging a batch of per-sample noise draws is equivalent to one
        // draw at scale sigma / sqrt(batch).
        const double scale = spec_.noise_scale / std::sqrt(static_cast<double>(batch_size));
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double noise = scale == 0.0 ? 0.0 : scale * rng.next_normal();
            grad[i] = eigenvalues_[i] * w[i] + noise;
        }
        return eval_loss(w);
    }

    double eval_loss(std::span<const double> w) const override {
        check_dim(w.size());
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += eigenvalues_[i] * w[i] * w[i];
        return 0.5 * s;
    }

    const std::vector<double>& eigenvalues() const { return eigenvalues_; }

private:
    void check_dim(std::size_t n) const {
        if (static_cast<std::int64_t>(n) != spec_.dim) {
            throw std::invalid_argument("NoisyQuadratic: dimension mismatch");
        }
    }

    NoisyQuadraticSpec spec_;
    std::vector<double> eigenvalues_;
};

/// Next-token prediction over a seeded order-2 Markov corpus, modelled by a
/// one-hidden-layer network: token embeddings are concatenated over the
/// context window, passed through a tanh layer, and projected to softmax
/// logits. Gradients are hand-derived. The evaluation loss is the mean
/// cross-entropy over the held-out tail of the corpus.
class SyntheticLmTask final : public Task {
public:
    explicit SyntheticLmTask(const SyntheticLmSpec& spec) : spec_(spec) {
        if (spec.vocab < 2) throw std::domain_error("SyntheticLM: vocab must be >= 2");
        if (spec.context < 1) throw std::domain_error("SyntheticLM: context must be >= 1");
        if (spec.hidden < 1) throw std::domain_error("SyntheticLM: hidden must be >= 1");
        if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0)) {
            throw std::domain_error("SyntheticLM: holdout_fraction must lie in (0,1)");
        }
        emb_ = std::max<std::int64_t>(4, spec.hidden / 2);
        const std::int64_t min_len = spec.context + 16;
        if (spec.corpus_len < min_len) {
            throw std::domain_error("SyntheticLM: corpus_len too short for context window");
        }
        build_corpus();
        train_end_ = spec.corpus_len -
                     static_cast<std::int64_t>(std::floor(spec.holdout_fraction *
                                                          static_cast<double>(spec.corpus_len)));
        train_end_ = std::clamp<std::int64_t>(train_end_, spec.context + 1, spec.corpus_len - 1);
    }

    std::int64_t dim() const override {
        const std::int64_t v = spec_.vocab, c = spec_.context, h = spec_.hidden, e = emb_;
        return v * e + h * (c * e) + h + v * h + v;
    }

    std::vector<double> initial_params(CounterRng& rng) const override {
        const std::int64_t v = spec_.vocab, c = spec_.context, h = spec_.hidden, e = emb_;
        std::vector<double> w(dim());
        std::size_t i = 0;
        for (std::int64_t k = 0; k < v * e; ++k) w[i++] = 0.1 * rng.next_normal();
        const double w1_scale = 1.0 / std::sqrt(static_cast<double>(c * e));
        for (std::int64_t k = 0; k < h * c * e; ++k) w[i++] = w1_scale * rng.next_normal();
        for (std::int64_t k = 0; k < h; ++k) w[i++] = 0.0;
        const double w2_scale = 1.0 / std::sqrt(static_cast<double>(h));
        for (std::int64_t k = 0; k < v * h; ++k) w[i++] = w2_scale * rng.next_normal();
        for (std::int64_t k = 0; k < v; ++k) w[i++] = 0.0;
        return w;
    }

    double stochastic_gradient(std::span<const double> w, std::int64_t batch_size,
                               CounterRng& rng, std::span<double> grad) const override {
        if (batch_size < 1) throw std::domain_error("SyntheticLM: batch_size must be >= 1");
        check_dim(w.size());
        check_dim(grad.size());
        std::fill(grad.begin(), grad.end(), 0.0);
        const std::uint64_t range = static_cast<std::uint64_t>(train_end_ - spec_.context);
        double loss = 0.0;
        for (std::int64_t b = 0; b < batch_size; ++b) {
            const std::int64_t pos = spec_.context +
                                     static_cast<std::int64_t>(rng.next_below(range));
            loss += example_loss_grad(w, pos, grad, 1.0 / static_cast<double>(batch_size));
        }
        return loss / static_cast<double>(batch_size);
    }

    double eval_loss(std::span<const double> w) const override {
        check_dim(w.size());
        double loss = 0.0;
        std::int64_t count = 0;
        for (std::int64_t pos = train_end_; pos < spec_.corpus_len; ++pos) {
            loss += example_loss_grad(w, pos, {}, 0.0);
            ++count;
        }
        return loss / static_cast<double>(count);
    }

    std::int64_t embedding_dim() const { return emb_; }
    const std::vector<std::int32_t>& corpus() const { return corpus_; }
    std::int64_t train_end() const { return train_end_; }

private:
    void check_dim(std::size_t n) const {
        if (static_cast<std::int64_t>(n) != dim()) {
            throw std::invalid_argument("SyntheticLM: dimension mismatch");
        }
    }

    void build_corpus() {
        const std::int64_t v = spec_.vocab;
        CounterRng rng(spec_.corpus_seed);
        // Peaked order-2 transition table: softmax of scaled Gaussian logits
        // per (prev2, prev1) pair, sampled once and shared across runs.
        constexpr double kConcentration = 4.0;
        std::vector<double> probs(static_cast<std::size_t>(v * v * v));
        for (std::int64_t a = 0; a < v; ++a) {
            for (std::int64_t b = 0; b < v; ++b) {
                double* row = &probs[static_cast<std::size_t>((a * v + b) * v)];
                double max_logit = -1e300;
                for (std::int64_t c = 0; c < v; ++c) {
                    row[c] = kConcentration * rng.next_normal();
                    max_logit = std::max(max_logit, row[c]);
                }
                double sum = 0.0;
                for (std::int64_t c = 0; c < v; ++c) {
                    row[c] = std::exp(row[c] - max_logit);
                    sum += row[c];
                }
                for (std::int64_t c = 0; c < v; ++c) row[c] /= sum;
            }
        }
        corpus_.resize(spec_.corpus_len);
        corpus_[0] = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(v)));
        corpus_[1] = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(v)));
        for (std::int64_t i = 2; i < spec_.corpus_len; ++i) {
            const double* row =
                &probs[static_cast<std::size_t>((corpus_[i - 2] * v + corpus_[i - 1]) * v)];
            const double u = rng.next_uniform();
            double acc = 0.0;
            std::int32_t pick = static_cast<std::int32_t>(v - 1);
            for (std::int64_t c = 0; c < v; ++c) {
                acc += row[c];
                if (u < acc) {
                    pick = static_cast<std::int32_t>(c);
                    break;
                }
            }
            corpus_[i] = pick;
        }
    }

    // Cross-entropy for predicting corpus_[pos] from the preceding window.
    // When `grad` is nonempty, accumulates `weight` times the gradient.
    double example_loss_grad(std::span<const double> w, std::int64_t pos,
                             std::span<double> grad, double weight) const {
        const std::int64_t v = spec_.vocab, c = spec_.context, h = spec_.hidden, e = emb_;
        const std::size_t off_e = 0;
        const std::size_t off_w1 = off_e + static_cast<std::size_t>(v * e);
        const std::size_t off_b1 = off_w1 + static_cast<std::size_t>(h * c * e);
        const std::size_t off_w2 = off_b1 + static_cast<std::size_t>(h);
        const std::size_t off_b2 = off_w2 + static_cast<std::size_t>(v * h);

        // Gather the context embedding (length c*e).
        thread_local std::vector<double> xe, hact, p, dhpre;
        xe.resize(static_cast<std::size_t>(c * e));
        for (std::int64_t k = 0; k < c; ++k) {
            const std::int32_t tok = corpus_[pos - c + k];
            const double* emb_row = &w[off_e + static_cast<std::size_t>(tok) *
                                                   static_cast<std::size_t>(e)];
            std::copy(emb_row, emb_row + e, &xe[static_cast<std::size_t>(k * e)]);
        }
        hact.resize(static_cast<std::size_t>(h));
        for (std::int64_t j = 0; j < h; ++j) {
            const double* row = &w[off_w1 + static_cast<std::size_t>(j) * xe.size()];
            double acc = w[off_b1 + static_cast<std::size_t>(j)];
            for (std::size_t k = 0; k < xe.size(); ++k) acc += row[k] * xe[k];
            hact[static_cast<std::size_t>(j)] = std::tanh(acc);
        }
        p.resize(static_cast<std::size_t>(v));
        double max_logit = -1e300;
        for (std::int64_t o = 0; o < v; ++o) {
            const double* row = &w[off_w2 + static_cast<std::size_t>(o * h)];
            double acc = w[off_b2 + static_cast<std::size_t>(o)];
            for (std::int64_t j = 0; j < h; ++j) acc += row[j] * hact[static_cast<std::size_t>(j)];
            p[static_cast<std::size_t>(o)] = acc;
            max_logit = std::max(max_logit, acc);
        }
        double denom = 0.0;
        for (std::int64_t o = 0; o < v; ++o) {
            p[static_cast<std::size_t>(o)] = std::exp(p[static_cast<std::size_t>(o)] - max_logit);
            denom += p[static_cast<std::size_t>(o)];
        }
        const std::int32_t target = corpus_[pos];
        const double p_target = p[static_cast<std::size_t>(target)] / denom;
        const double loss = -std::log(p_target);
        if (grad.empty()) return loss;

        // Backward pass.
        dhpre.assign(static_cast<std::size_t>(h), 0.0);
        for (std::int64_t o = 0; o < v; ++o) {
            double dlogit = p[static_cast<std::size_t>(o)] / denom;
            if (o == target) dlogit -= 1.0;
            dlogit *= weight;
            grad[off_b2 + static_cast<std::size_t>(o)] += dlogit;
            double* gw2 = &grad[off_w2 + static_cast<std::size_t>(o * h)];
            const double* w2 = &w[off_w2 + static_cast<std::size_t>(o * h)];
            for (std::int64_t j = 0; j < h; ++j) {
                gw2[j] += dlogit * hact[static_cast<std::size_t>(j)];
                dhpre[static_cast<std::size_t>(j)] += dlogit * w2[j];
            }
        }
        for (std::int64_t j = 0; j < h; ++j) {
            const double a = hact[static_cast<std::size_t>(j)];
            dhpre[static_cast<std::size_t>(j)] *= (1.0 - a * a);
        }
        for (std::int64_t j = 0; j < h; ++j) {
            const double dj = dhpre[static_cast<std::size_t>(j)];
            if (dj == 0.0) continue;
            grad[off_b1 + static_cast<std::size_t>(j)] += dj;
            double* gw1 = &grad[off_w1 + static_cast<std::size_t>(j) * xe.size()];
            const double* w1 = &w[off_w1 + static_cast<std::size_t>(j) * xe.size()];
            for (std::size_t k = 0; k < xe.size(); ++k) {
                gw1[k] += dj * xe[k];
            }
            // d xe is accumulated straight into the embedding rows.
            for (std::int64_t k = 0; k < c; ++k) {
                const std::int32_t tok = corpus_[pos - c + k];
                double* ge = &grad[off_e + static_cast<std::size_t>(tok) *
                                               static_cast<std::size_t>(e)];
                const double* w1k = w1 + k * e;
                for (std::int64_t m = 0; m < e; ++m) ge[m] += dj * w1k[m];
            }
        }
        return loss;
    }

    SyntheticLmSpec spec_;
    std::int64_t emb_ = 0;
    std::int64_t train_end_ = 0;
    std::vector<std::int32_t> corpus_;
};

inline std::unique_ptr<Task> make_task(const TaskSpec& spec) {
    if (std::holds_alternative<NoisyQuadraticSpec>(spec.kind)) {
        return std::make_unique<NoisyQuadraticTask>(std::get<NoisyQuadraticSpec>(spec.kind));
    }
    return std::make_unique<SyntheticLmTask>(std::get<SyntheticLmSpec>(spec.kind));
}

} // namespace cdlab::tasks
