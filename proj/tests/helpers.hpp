#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mdf/autodiff.hpp"

namespace testutil {

using DArray = mdf::ArrayT<double>;
using DTape = mdf::TapeT<double>;
using DValue = mdf::ValueT<double>;

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <typename Rng>
DArray random_darray(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<double> v(DArray::numel_of(shape));
    for (auto& x : v) x = gauss(rng);
    return DArray::unchecked(std::move(shape), std::move(v));
}

template <typename Rng>
mdf::Array random_farray(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    std::vector<float> v(mdf::Array::numel_of(shape));
    for (auto& x : v) x = static_cast<float>(gauss(rng));
    return mdf::Array::unchecked(std::move(shape), std::move(v));
}

// Scalar loss as a function of a parameter list, evaluated via a fresh
// tape (the finite-difference side of every gradient oracle).
using LossFn = std::function<DValue(DTape&, std::span<const DValue>)>;

inline double eval_loss(const LossFn& f, const std::vector<DArray>& params) {
    DTape tape;
    std::vector<DValue> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p));
    return tape.value(f(tape, std::span<const DValue>(leaves)))[0];
}

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Central finite differences against the reverse-mode gradient, element by
// element over every parameter.
inline FdReport fd_check(const LossFn& f, const std::vector<DArray>& params, double h, double floor = 1e-6) {
    std::vector<DArray> grads = mdf::grad(
        [&](DTape& tape, const std::vector<DValue>& leaves) {
            return f(tape, std::span<const DValue>(leaves));
        },
        params);
    FdReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].numel(); ++i) {
            std::vector<DArray> plus = params;
            std::vector<DArray> minus = params;
            plus[p][i] += h;
            minus[p][i] -= h;
            const double fd = (eval_loss(f, plus) - eval_loss(f, minus)) / (2.0 * h);
            report.max_rel_err = std::max(report.max_rel_err, rel_err(grads[p][i], fd, floor));
            ++report.checked;
        }
    }
    return report;
}

}  // namespace testutil
