#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mdf/array.hpp"

namespace mdf {

// Output-fusion weights fit by least squares on validation probabilities.
struct FusionWeights {
    double w1 = 0.0;
    double w2 = 0.0;
    double residual = 0.0;  // achieved least-squares objective on the fitting set
};

struct EnsembleWeights {
    std::vector<double> w;
    double residual = 0.0;
};

namespace detail {

// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
// rotations; m here is the ensemble size (2 or 3 in practice).
inline void jacobi_eigen(std::vector<double>& a, std::size_t m, std::vector<double>& eigvals,
                         std::vector<double>& eigvecs) {
    eigvecs.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) eigvecs[i * m + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = p + 1; q < m; ++q) off += a[p * m + q] * a[p * m + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                if (std::abs(a[p * m + q]) < 1e-300) continue;
                const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * a[p * m + q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < m; ++i) {
                    const double aip = a[i * m + p], aiq = a[i * m + q];
                    a[i * m + p] = c * aip - s * aiq;
                    a[i * m + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < m; ++i) {
                    const double api = a[p * m + i], aqi = a[q * m + i];
                    a[p * m + i] = c * api - s * aqi;
                    a[q * m + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < m; ++i) {
                    const double vip = eigvecs[i * m + p], viq = eigvecs[i * m + q];
                    eigvecs[i * m + p] = c * vip - s * viq;
                    eigvecs[i * m + q] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(m);
    for (std::size_t i = 0; i < m; ++i) eigvals[i] = a[i * m + i];
}

// Minimum-norm solution of the (possibly rank-deficient) normal equations
// G·w = r with G symmetric PSD: w = G⁺·r via the eigendecomposition.
inline std::vector<double> pinv_solve(std::vector<double> gram, std::vector<double> rhs) {
    const std::size_t m = rhs.size();
    std::vector<double> eigvals, eigvecs;
    jacobi_eigen(gram, m, eigvals, eigvecs);
    double max_eig = 0.0;
    for (double e : eigvals) max_eig = std::max(max_eig, std::abs(e));
    const double cutoff = max_eig * 1e-12;
    std::vector<double> w(m, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        if (std::abs(eigvals[e]) <= cutoff) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += eigvecs[i * m + e] * rhs[i];
        proj /= eigvals[e];
        for (std::size_t i = 0; i < m; ++i) w[i] += eigvecs[i * m + e] * proj;
    }
    return w;
}

inline void check_prob_matrix(const Array& probs, std::size_t n, std::size_t k, const char* what) {
    if (probs.ndim() != 2 || probs.shape()[0] != n || probs.shape()[1] != k) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch, expected [" + std::to_string(n) + " x " +
                                    std::to_string(k) + "], got " + Array::shape_string(probs.shape()));
    }
}

}  // namespace detail

// Least squares over m branch weights against one-hot targets, solved by
// the m×m normal equations with a minimum-norm pseudo-inverse on rank
// deficiency. Residual is the achieved objective Σ(Σwᵢ·Pᵢ − Y)².
inline EnsembleWeights fit_ensemble(std::span<const Array> probs, const std::vector<int>& labels) {
    if (probs.empty()) throw std::invalid_argument("fit_ensemble: no branches");
    if (labels.empty()) throw std::invalid_argument("fit_ensemble: empty fitting set");
    const std::size_t m = probs.size();
    const std::size_t n = labels.size();
    const std::size_t k = probs[0].ndim() == 2 ? probs[0].shape()[1] : 0;
    if (k == 0) throw std::invalid_argument("fit_ensemble: expected 2-D probability matrices");
    for (std::size_t i = 0; i < m; ++i) detail::check_prob_matrix(probs[i], n, k, "fit_ensemble");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::invalid_argument("fit_ensemble: label out of range");
    }

    // Gram matrix and right-hand side accumulated in double.
    std::vector<double> gram(m * m, 0.0), rhs(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b) {
            double acc = 0.0;
            const float* pa = probs[a].data();
            const float* pb = probs[b].data();
            for (std::size_t i = 0; i < n * k; ++i) acc += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
            gram[a * m + b] = acc;
            gram[b * m + a] = acc;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(probs[a].at2(i, labels[i]));
        rhs[a] = acc;
    }

    EnsembleWeights out;
    out.w = detail::pinv_solve(std::move(gram), std::move(rhs));
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double fused = 0.0;
            for (std::size_t a = 0; a < m; ++a) fused += out.w[a] * static_cast<double>(probs[a].at2(i, j));
            const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
            const double d = fused - target;
            res += d * d;
        }
    }
    out.residual = res;
    return out;
}

inline FusionWeights fit_fusion(const Array& probs_eo, const Array& probs_sar, const std::vector<int>& labels) {
    const Array branches[2] = {probs_eo, probs_sar};
    EnsembleWeights e = fit_ensemble(std::span<const Array>(branches, 2), labels);
    return {e.w[0], e.w[1], e.residual};
}

// Residual of arbitrary fixed weights on a fitting set (used for the
// dominance checks against the single-branch residuals).
inline double fusion_residual(std::span<const Array> probs, std::span<const double> w,
                              const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    const std::size_t k = probs[0].shape()[1];
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double fused = 0.0;
            for (std::size_t a = 0; a < probs.size(); ++a) fused += w[a] * static_cast<double>(probs[a].at2(i, j));
            const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
            const double d = fused - target;
            res += d * d;
        }
    }
    return res;
}

// Argmax over classes of the weighted sum of branch probabilities; ties
// break toward the lowest class index.
inline std::vector<int> ensemble_predict(std::span<const Array> probs, std::span<const double> w) {
    if (probs.empty() || probs.size() != w.size()) throw std::invalid_argument("ensemble_predict: branch/weight counts");
    const std::size_t n = probs[0].shape()[0];
    const std::size_t k = probs[0].shape()[1];
    for (const auto& p : probs) detail::check_prob_matrix(p, n, k, "ensemble_predict");
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < probs.size(); ++a) s += w[a] * static_cast<double>(probs[a].at2(i, j));
            if (s > best_score) {
                best_score = s;
                best = static_cast<int>(j);
            }
        }
        pred[i] = best;
    }
    return pred;
}

inline std::vector<int> fuse_predict(const FusionWeights& w, const Array& probs_eo, const Array& probs_sar) {
    const Array branches[2] = {probs_eo, probs_sar};
    const double weights[2] = {w.w1, w.w2};
    return ensemble_predict(std::span<const Array>(branches, 2), std::span<const double>(weights, 2));
}

}  // namespace mdf
