#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mdf/array.hpp"

namespace mdf {

// Adam moment estimates; one slot per parameter array, shapes match exactly.
template <typename T>
struct AdamStateT {
    std::vector<ArrayT<T>> m;
    std::vector<ArrayT<T>> v;
    std::int64_t step = 0;

    static AdamStateT init(const std::vector<ArrayT<T>>& params) {
        AdamStateT s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.push_back(ArrayT<T>::zeros(p.shape()));
            s.v.push_back(ArrayT<T>::zeros(p.shape()));
        }
        return s;
    }
};

using AdamState = AdamStateT<float>;

template <typename T>
struct AdamResultT {
    std::vector<ArrayT<T>> params;
    AdamStateT<T> state;
};

// One bias-corrected Adam update. Pure: inputs are untouched, the advanced
// parameters and state are returned.
template <typename T>
AdamResultT<T> adam_step(const std::vector<ArrayT<T>>& params, const std::vector<ArrayT<T>>& grads,
                         const AdamStateT<T>& state, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
                         T eps = T(1e-8)) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient/state counts differ");
    }
    AdamResultT<T> out;
    out.params.reserve(params.size());
    out.state.m.reserve(params.size());
    out.state.v.reserve(params.size());
    out.state.step = state.step + 1;
    const T t = static_cast<T>(out.state.step);
    const T bc1 = T(1) - std::pow(beta1, t);
    const T bc2 = T(1) - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i])) {
            throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
        }
        if (!grads[i].all_finite()) {
            throw std::invalid_argument("adam_step: non-finite gradient at parameter " + std::to_string(i));
        }
        std::vector<T> p(params[i].values());
        std::vector<T> m(state.m[i].values());
        std::vector<T> v(state.v[i].values());
        const T* g = grads[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (T(1) - beta1) * g[j];
            v[j] = beta2 * v[j] + (T(1) - beta2) * g[j] * g[j];
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        out.params.push_back(ArrayT<T>::unchecked(params[i].shape(), std::move(p)));
        out.state.m.push_back(ArrayT<T>::unchecked(params[i].shape(), std::move(m)));
        out.state.v.push_back(ArrayT<T>::unchecked(params[i].shape(), std::move(v)));
    }
    return out;
}

// Piecewise-constant step decay: rate = initial · decay^(boundaries crossed).
struct LrSchedule {
    double initial = 0.03;
    double decay = 0.1;
    std::vector<int> boundaries = {50, 80};
    int total_epochs = 100;
};

inline double lr_at(const LrSchedule& schedule, int epoch) {
    if (epoch < 0 || epoch >= schedule.total_epochs) {
        throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                                    std::to_string(schedule.total_epochs) + ")");
    }
    double rate = schedule.initial;
    for (int b : schedule.boundaries) {
        if (epoch >= b) rate *= schedule.decay;
    }
    return rate;
}

}  // namespace mdf
