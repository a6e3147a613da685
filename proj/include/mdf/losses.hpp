#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "mdf/autodiff.hpp"
#include "mdf/common.hpp"

namespace mdf {

// Sliced-Wasserstein estimator settings: number of random unit projection
// directions, the 1-D transport power, and the seed the directions (and any
// subset truncation) are drawn from.
struct SwdConfig {
    int num_slices = 64;
    int p = 2;  // 1 or 2
    std::uint64_t projection_seed = 0;
};

template <typename T>
struct FocalConfigT {
    T gamma = T(2);
    std::vector<T> alpha;  // per-class weights; empty means 1.0 for every class
};

using FocalConfig = FocalConfigT<float>;

// The four composite-loss terms and their weighted total.
template <typename T>
struct LossBreakdownT {
    T focal_eo = T(0);
    T focal_sar = T(0);
    T marginal_swd = T(0);
    T conditional_swd = T(0);
    T total = T(0);
    T lambda = T(1);
    T eta = T(1);
};

using LossBreakdown = LossBreakdownT<float>;

enum class SupervisedLoss { Focal, CrossEntropy };

// ---------------------------------------------------------------------------
// Supervised terms
// ---------------------------------------------------------------------------

// Mean over the batch of −α_y·(1−p_y)^γ·log p_y with p = softmax(logits).
template <typename T>
ValueT<T> focal_loss(TapeT<T>& tape, ValueT<T> logits, const std::vector<int>& labels,
                     const FocalConfigT<T>& cfg) {
    const auto& lv = tape.value(logits);
    if (lv.ndim() != 2) throw std::invalid_argument("focal_loss: expected 2-D logits");
    const std::size_t n = lv.shape()[0], k = lv.shape()[1];
    if (n == 0 || labels.empty()) throw std::invalid_argument("focal_loss: empty batch");
    if (k < 2) throw std::invalid_argument("focal_loss: need at least 2 classes");
    if (cfg.gamma < T(0)) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    if (!cfg.alpha.empty() && cfg.alpha.size() != k) {
        throw std::invalid_argument("focal_loss: alpha size must equal class count");
    }

    ValueT<T> logp = select_labels(log_softmax_rows(logits), labels);  // [n]
    ValueT<T> p = mdf::exp(logp);
    ValueT<T> modulator = pow_const(add_scalar(scale(p, T(-1)), T(1)), cfg.gamma);  // (1−p)^γ
    ValueT<T> weighted = mul(modulator, logp);
    if (!cfg.alpha.empty()) {
        std::vector<T> per_row(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.alpha[labels[i]] <= T(0)) throw std::invalid_argument("focal_loss: alpha entries must be positive");
            per_row[i] = cfg.alpha[labels[i]];
        }
        weighted = weight_elem(weighted, std::move(per_row));
    }
    return scale(mean_all(weighted), T(-1));
}

// Mean over the batch of −log p_y; kept as its own graph so the focal
// γ=0 identity is checked against an independent path.
template <typename T>
ValueT<T> cross_entropy(TapeT<T>& tape, ValueT<T> logits, const std::vector<int>& labels) {
    const auto& lv = tape.value(logits);
    if (lv.ndim() != 2 || lv.shape()[0] == 0) throw std::invalid_argument("cross_entropy: empty batch");
    if (lv.shape()[1] < 2) throw std::invalid_argument("cross_entropy: need at least 2 classes");
    ValueT<T> logp = select_labels(log_softmax_rows(logits), labels);
    return scale(mean_all(logp), T(-1));
}

// Plain (non-recording) conveniences for tests and evaluation.
template <typename T>
T focal_loss(const ArrayT<T>& logits, const std::vector<int>& labels, const FocalConfigT<T>& cfg) {
    TapeT<T> tape;
    return tape.value(focal_loss(tape, tape.leaf(logits), labels, cfg))[0];
}

template <typename T>
T cross_entropy(const ArrayT<T>& logits, const std::vector<int>& labels) {
    TapeT<T> tape;
    return tape.value(cross_entropy(tape, tape.leaf(logits), labels))[0];
}

// ---------------------------------------------------------------------------
// Sliced-Wasserstein discrepancy
// ---------------------------------------------------------------------------

// Exact 1-D p-Wasserstein between equal-size empirical samples:
// ((1/n)·Σ|sort(a)_i − sort(b)_i|^p)^(1/p).
template <typename T>
T wasserstein_1d(std::span<const T> a, std::span<const T> b, int p) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("wasserstein_1d: sample counts differ (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    if (a.empty()) throw std::invalid_argument("wasserstein_1d: empty samples");
    if (p != 1 && p != 2) throw std::invalid_argument("wasserstein_1d: p must be 1 or 2");
    std::vector<T> sa(a.begin(), a.end());
    std::vector<T> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    T acc = T(0);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const T d = sa[i] - sb[i];
        acc += (p == 1) ? std::abs(d) : d * d;
    }
    acc /= static_cast<T>(sa.size());
    return (p == 1) ? acc : std::sqrt(acc);
}

namespace detail {

template <typename T>
std::vector<std::size_t> argsort(const ArrayT<T>& v) {
    std::vector<std::size_t> idx(v.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    return idx;
}

// Differentiable 1-D Wasserstein: the sort permutations are frozen at
// forward time (the objective is piecewise linear in the inputs, so this
// is the correct subgradient almost everywhere).
template <typename T>
ValueT<T> w1d_on_tape(TapeT<T>& tape, ValueT<T> a, ValueT<T> b, int p) {
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    if (av.numel() != bv.numel()) throw std::invalid_argument("wasserstein_1d: sample counts differ");
    if (av.numel() == 0) throw std::invalid_argument("wasserstein_1d: empty samples");
    ValueT<T> sa = gather(a, argsort(av));
    ValueT<T> sb = gather(b, argsort(bv));
    ValueT<T> d = sub(sa, sb);
    if (p == 1) return mean_all(mdf::abs(d));
    return sqrt_or_zero(mean_all(mul(d, d)));
}

// Unit projection directions as a constant [z × S] matrix.
template <typename T>
ArrayT<T> slice_directions(std::size_t z, int num_slices, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, salt::kSlices));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<T> dirs(z * static_cast<std::size_t>(num_slices));
    for (int s = 0; s < num_slices; ++s) {
        double norm2 = 0.0;
        std::vector<double> d(z);
        do {
            norm2 = 0.0;
            for (std::size_t j = 0; j < z; ++j) {
                d[j] = gauss(rng);
                norm2 += d[j] * d[j];
            }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t j = 0; j < z; ++j) dirs[j * num_slices + s] = static_cast<T>(d[j] * inv);
    }
    return ArrayT<T>::unchecked({z, static_cast<std::size_t>(num_slices)}, std::move(dirs));
}

}  // namespace detail

// Empirical sliced-Wasserstein discrepancy: mean over num_slices random
// unit directions of the exact 1-D distance between the projected samples.
template <typename T>
ValueT<T> swd(TapeT<T>& tape, ValueT<T> latents_a, ValueT<T> latents_b, const SwdConfig& cfg) {
    const auto& av = tape.value(latents_a);
    const auto& bv = tape.value(latents_b);
    if (av.ndim() != 2 || bv.ndim() != 2) throw std::invalid_argument("swd: expected 2-D latent batches");
    if (av.shape()[0] == 0) throw std::invalid_argument("swd: empty batch");
    if (av.shape()[0] != bv.shape()[0]) throw std::invalid_argument("swd: row counts differ");
    if (av.shape()[1] != bv.shape()[1] || av.shape()[1] == 0) throw std::invalid_argument("swd: bad latent dim");
    if (cfg.num_slices < 1) throw std::invalid_argument("swd: need at least one slice");

    const std::size_t z = av.shape()[1];
    ValueT<T> dirs = tape.leaf(detail::slice_directions<T>(z, cfg.num_slices, cfg.projection_seed));
    ValueT<T> pa = matmul(latents_a, dirs);
    ValueT<T> pb = matmul(latents_b, dirs);
    std::vector<ValueT<T>> per_slice;
    per_slice.reserve(cfg.num_slices);
    for (int s = 0; s < cfg.num_slices; ++s) {
        per_slice.push_back(detail::w1d_on_tape(tape, col(pa, s), col(pb, s), cfg.p));
    }
    return scale(sum_of(std::span<const ValueT<T>>(per_slice)), T(1) / static_cast<T>(cfg.num_slices));
}

template <typename T>
T swd(const ArrayT<T>& a, const ArrayT<T>& b, const SwdConfig& cfg) {
    TapeT<T> tape;
    return tape.value(swd(tape, tape.leaf(a), tape.leaf(b), cfg))[0];
}

namespace detail {
// Count equalization for the class-conditional term: a seeded uniform
// subset of the larger group, truncated to the smaller size. Exposed shape
// of the rule (documented for the per-class loop oracle): Fisher–Yates
// shuffle of the index list with mt19937_64(mix(projection_seed,
// kCondSubset, class_id)), keep the first n_small entries.
inline std::vector<std::size_t> equalize_subset(std::size_t n_large, std::size_t n_small, std::uint64_t seed,
                                                int class_id) {
    std::vector<std::size_t> idx(n_large);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, salt::kCondSubset, static_cast<std::uint64_t>(class_id)));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n_small);
    return idx;
}
}  // namespace detail

// Sum over classes present in both batches of the SWD between the
// class-restricted latents; groups are truncated to equal counts first.
// Classes seen in only one batch contribute zero.
template <typename T>
ValueT<T> class_conditional_swd(TapeT<T>& tape, ValueT<T> latents_a, const std::vector<int>& labels_a,
                                ValueT<T> latents_b, const std::vector<int>& labels_b, const SwdConfig& cfg) {
    const auto& av = tape.value(latents_a);
    const auto& bv = tape.value(latents_b);
    if (av.ndim() != 2 || bv.ndim() != 2) throw std::invalid_argument("class_conditional_swd: expected 2-D latents");
    if (labels_a.size() != av.shape()[0] || labels_b.size() != bv.shape()[0]) {
        throw std::invalid_argument("class_conditional_swd: label count mismatch");
    }
    int max_class = -1;
    for (int y : labels_a) max_class = std::max(max_class, y);
    for (int y : labels_b) max_class = std::max(max_class, y);
    for (int y : labels_a)
        if (y < 0) throw std::invalid_argument("class_conditional_swd: negative label");
    for (int y : labels_b)
        if (y < 0) throw std::invalid_argument("class_conditional_swd: negative label");

    std::vector<ValueT<T>> terms;
    for (int j = 0; j <= max_class; ++j) {
        std::vector<std::size_t> ia, ib;
        for (std::size_t i = 0; i < labels_a.size(); ++i)
            if (labels_a[i] == j) ia.push_back(i);
        for (std::size_t i = 0; i < labels_b.size(); ++i)
            if (labels_b[i] == j) ib.push_back(i);
        if (ia.empty() || ib.empty()) continue;
        const std::size_t n = std::min(ia.size(), ib.size());
        if (ia.size() > n) {
            auto keep = detail::equalize_subset(ia.size(), n, cfg.projection_seed, j);
            std::vector<std::size_t> sel(n);
            for (std::size_t i = 0; i < n; ++i) sel[i] = ia[keep[i]];
            ia = std::move(sel);
        }
        if (ib.size() > n) {
            auto keep = detail::equalize_subset(ib.size(), n, cfg.projection_seed, j);
            std::vector<std::size_t> sel(n);
            for (std::size_t i = 0; i < n; ++i) sel[i] = ib[keep[i]];
            ib = std::move(sel);
        }
        terms.push_back(swd(tape, select_rows(latents_a, std::move(ia)), select_rows(latents_b, std::move(ib)), cfg));
    }
    if (terms.empty()) return tape.leaf(ArrayT<T>::scalar(T(0)));
    return sum_of(std::span<const ValueT<T>>(terms));
}

// ---------------------------------------------------------------------------
// Composite objective
// ---------------------------------------------------------------------------

template <typename T>
struct MdfLossT {
    ValueT<T> total;              // scalar node on the caller's tape
    LossBreakdownT<T> breakdown;  // plain values for reporting
};

// Two supervised terms on classifier outputs, a marginal SWD on the
// unlabeled latents, and a class-conditional SWD on the labeled latents.
// Terms with a zero coefficient are still evaluated for the breakdown but
// are left out of the total's graph, so they contribute no gradient at all.
template <typename T>
MdfLossT<T> mdf_loss(TapeT<T>& tape, ValueT<T> eo_logits, const std::vector<int>& eo_labels, ValueT<T> sar_logits,
                     const std::vector<int>& sar_labels, ValueT<T> labeled_lat_eo, ValueT<T> labeled_lat_sar,
                     std::optional<ValueT<T>> unlabeled_lat_eo, std::optional<ValueT<T>> unlabeled_lat_sar, T lambda,
                     T eta, const FocalConfigT<T>& focal_cfg, const SwdConfig& swd_cfg,
                     SupervisedLoss supervised = SupervisedLoss::Focal) {
    if (lambda < T(0) || eta < T(0)) throw std::invalid_argument("mdf_loss: lambda/eta must be >= 0");
    if (eo_labels.size() != sar_labels.size()) throw std::invalid_argument("mdf_loss: labeled batches not paired");
    if (unlabeled_lat_eo.has_value() != unlabeled_lat_sar.has_value()) {
        throw std::invalid_argument("mdf_loss: unlabeled latents must come as a pair");
    }
    if (unlabeled_lat_eo.has_value()) {
        const auto& ue = tape.value(*unlabeled_lat_eo);
        const auto& us = tape.value(*unlabeled_lat_sar);
        if (ue.shape()[0] != us.shape()[0]) throw std::invalid_argument("mdf_loss: unlabeled batches not equal-length");
    }

    MdfLossT<T> out;
    out.breakdown.lambda = lambda;
    out.breakdown.eta = eta;

    ValueT<T> f_eo = supervised == SupervisedLoss::Focal ? focal_loss(tape, eo_logits, eo_labels, focal_cfg)
                                                         : cross_entropy(tape, eo_logits, eo_labels);
    ValueT<T> f_sar = supervised == SupervisedLoss::Focal ? focal_loss(tape, sar_logits, sar_labels, focal_cfg)
                                                          : cross_entropy(tape, sar_logits, sar_labels);
    out.breakdown.focal_eo = tape.value(f_eo)[0];
    out.breakdown.focal_sar = tape.value(f_sar)[0];
    ValueT<T> total = add(f_eo, f_sar);

    if (unlabeled_lat_eo.has_value()) {
        ValueT<T> marginal = swd(tape, *unlabeled_lat_eo, *unlabeled_lat_sar, swd_cfg);
        out.breakdown.marginal_swd = tape.value(marginal)[0];
        if (lambda > T(0)) total = add(total, scale(marginal, lambda));
    }

    ValueT<T> conditional =
        class_conditional_swd(tape, labeled_lat_eo, eo_labels, labeled_lat_sar, sar_labels, swd_cfg);
    out.breakdown.conditional_swd = tape.value(conditional)[0];
    if (eta > T(0)) total = add(total, scale(conditional, eta));

    out.total = total;
    out.breakdown.total = tape.value(total)[0];
    return out;
}

}  // namespace mdf
