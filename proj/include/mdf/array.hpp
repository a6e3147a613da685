#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdf {

// Dense row-major array of a floating-point scalar type. Construction
// rejects non-finite values; product(shape) must equal the buffer length.
template <typename T>
class ArrayT {
  public:
    ArrayT() = default;

    ArrayT(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (numel_of(shape_) != values_.size()) {
            throw std::invalid_argument("array: shape " + shape_string(shape_) + " does not match buffer length " +
                                        std::to_string(values_.size()));
        }
        check_finite();
    }

    static ArrayT zeros(std::vector<std::size_t> shape) {
        const std::size_t n = numel_of(shape);
        return unchecked(std::move(shape), std::vector<T>(n, T(0)));
    }

    static ArrayT full(std::vector<std::size_t> shape, T value) {
        const std::size_t n = numel_of(shape);
        ArrayT a = unchecked(std::move(shape), std::vector<T>(n, value));
        a.check_finite();
        return a;
    }

    static ArrayT scalar(T value) { return ArrayT({1}, {value}); }

    // Internal fast path: caller guarantees shape/length agreement and
    // takes responsibility for finiteness (tape ops validate with the
    // offending op named in the error).
    static ArrayT unchecked(std::vector<std::size_t> shape, std::vector<T> values) {
        ArrayT a;
        a.shape_ = std::move(shape);
        a.values_ = std::move(values);
        return a;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t numel() const { return values_.size(); }
    std::size_t ndim() const { return shape_.size(); }

    // 2-D conveniences; a 1-D array is treated as a single row.
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : numel(); }

    const std::vector<T>& values() const { return values_; }
    std::vector<T>& values() { return values_; }
    const T* data() const { return values_.data(); }
    T* data() { return values_.data(); }

    T operator[](std::size_t i) const { return values_[i]; }
    T& operator[](std::size_t i) { return values_[i]; }
    T at2(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    bool same_shape(const ArrayT& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (T v : values_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw std::invalid_argument("array: zero-sized dimension");
            n *= d;
        }
        return n;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }

  private:
    void check_finite() const {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(static_cast<double>(values_[i]))) {
                throw std::invalid_argument("array: non-finite value at flat index " + std::to_string(i));
            }
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<T> values_;
};

using Array = ArrayT<float>;

// ---------------------------------------------------------------------------
// Plain kernels shared by the tape ops and the inference path.
// ---------------------------------------------------------------------------

template <typename T>
ArrayT<T> matmul(const ArrayT<T>& a, const ArrayT<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
        throw std::invalid_argument("matmul: incompatible shapes " + ArrayT<T>::shape_string(a.shape()) + " and " +
                                    ArrayT<T>::shape_string(b.shape()));
    }
    const std::size_t n = a.shape()[0], m = a.shape()[1], p = b.shape()[1];
    std::vector<T> out(n * p, T(0));
    const T* pa = a.data();
    const T* pb = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        T* po = out.data() + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const T aik = pa[i * m + k];
            const T* pbk = pb + k * p;
            for (std::size_t j = 0; j < p; ++j) po[j] += aik * pbk[j];
        }
    }
    return ArrayT<T>::unchecked({n, p}, std::move(out));
}

template <typename T>
ArrayT<T> add_rowvec(const ArrayT<T>& a, const ArrayT<T>& bias) {
    if (a.ndim() != 2 || bias.numel() != a.shape()[1]) {
        throw std::invalid_argument("add_rowvec: bias length " + std::to_string(bias.numel()) +
                                    " does not match columns of " + ArrayT<T>::shape_string(a.shape()));
    }
    std::vector<T> out(a.values());
    const std::size_t n = a.shape()[0], k = a.shape()[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] += bias[j];
    return ArrayT<T>::unchecked(a.shape(), std::move(out));
}

template <typename T>
ArrayT<T> relu(const ArrayT<T>& a) {
    std::vector<T> out(a.values());
    for (T& v : out)
        if (v < T(0)) v = T(0);
    return ArrayT<T>::unchecked(a.shape(), std::move(out));
}

// Numerically stable row-wise softmax.
template <typename T>
ArrayT<T> softmax_rows(const ArrayT<T>& logits) {
    if (logits.ndim() != 2) throw std::invalid_argument("softmax_rows: expected 2-D logits");
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    std::vector<T> out(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < k; ++j) {
            out[i * k + j] = std::exp(row[j] - mx);
            sum += out[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= sum;
    }
    return ArrayT<T>::unchecked(logits.shape(), std::move(out));
}

}  // namespace mdf
