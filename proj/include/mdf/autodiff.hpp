#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdf/array.hpp"

namespace mdf {

template <typename T>
class TapeT;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
template <typename T>
struct ValueT {
    TapeT<T>* tape = nullptr;
    int id = -1;
};

// Reverse-mode differentiation tape. Forward ops append nodes in
// topological order (parents always precede children); gradients() walks
// the node list backwards over the subgraph reachable from the loss node.
// Replaying a forward pass with identical inputs is bit-identical: every
// op is a fixed sequence of scalar operations with a fixed reduction order.
template <typename T>
class TapeT {
  public:
    using Value = ValueT<T>;
    using BackFn = std::function<void(TapeT&)>;

    struct Node {
        ArrayT<T> value;
        std::vector<int> parents;
        BackFn backward;  // empty for leaves
        const char* op = "leaf";
    };

    Value leaf(ArrayT<T> v) {
        nodes_.push_back(Node{std::move(v), {}, BackFn{}, "leaf"});
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

    const ArrayT<T>& value(Value v) const { return nodes_.at(v.id).value; }
    const Node& node(int id) const { return nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    // Appends a node whose raw output buffer is validated here so a
    // non-finite forward result names the offending op.
    Value emit(std::vector<std::size_t> shape, std::vector<T> out, std::vector<int> parents, BackFn back,
               const char* op) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!std::isfinite(static_cast<double>(out[i]))) {
                throw std::runtime_error(std::string("autodiff: op '") + op + "' (node " +
                                         std::to_string(nodes_.size()) + ") produced non-finite value at flat index " +
                                         std::to_string(i));
            }
        }
        nodes_.push_back(Node{ArrayT<T>::unchecked(std::move(shape), std::move(out)), std::move(parents),
                              std::move(back), op});
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

    Value emit_array(ArrayT<T> out, std::vector<int> parents, BackFn back, const char* op) {
        return emit(out.shape(), std::move(out.values()), std::move(parents), std::move(back), op);
    }

    // Gradient buffer of a node during the backward pass, allocated on
    // first touch so unreachable subgraphs stay pruned.
    std::vector<T>& grad_buf(int id) {
        auto& g = grads_[id];
        if (g.empty()) g.assign(nodes_[id].value.numel(), T(0));
        return g;
    }

    bool grad_touched(int id) const { return !grads_[id].empty(); }

    // Gradients of a scalar loss with respect to a set of (leaf) nodes.
    // Nodes not reachable from the loss get zero gradients.
    std::vector<ArrayT<T>> gradients(Value loss, std::span<const Value> wrt) {
        if (loss.tape != this) throw std::invalid_argument("autodiff: loss from a different tape");
        if (nodes_.at(loss.id).value.numel() != 1) {
            throw std::invalid_argument("autodiff: gradients require a scalar loss, got shape " +
                                        ArrayT<T>::shape_string(nodes_[loss.id].value.shape()));
        }
        // Mark the ancestry of the loss; everything else is pruned.
        std::vector<char> reachable(nodes_.size(), 0);
        std::vector<int> stack{loss.id};
        reachable[loss.id] = 1;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            for (int p : nodes_[id].parents) {
                if (!reachable[p]) {
                    reachable[p] = 1;
                    stack.push_back(p);
                }
            }
        }

        grads_.assign(nodes_.size(), {});
        grad_buf(loss.id)[0] = T(1);
        for (int id = loss.id; id >= 0; --id) {
            if (!reachable[id] || grads_[id].empty() || !nodes_[id].backward) continue;
            nodes_[id].backward(*this);
        }

        std::vector<ArrayT<T>> out;
        out.reserve(wrt.size());
        for (Value v : wrt) {
            if (v.tape != this) throw std::invalid_argument("autodiff: wrt node from a different tape");
            const auto& shape = nodes_.at(v.id).value.shape();
            if (grads_[v.id].empty()) {
                out.push_back(ArrayT<T>::zeros(shape));
            } else {
                for (std::size_t i = 0; i < grads_[v.id].size(); ++i) {
                    if (!std::isfinite(static_cast<double>(grads_[v.id][i]))) {
                        throw std::runtime_error(std::string("autodiff: non-finite gradient through op '") +
                                                 nodes_[v.id].op + "'");
                    }
                }
                out.push_back(ArrayT<T>::unchecked(shape, grads_[v.id]));
            }
        }
        return out;
    }

  private:
    std::vector<Node> nodes_;
    std::vector<std::vector<T>> grads_;
};

using Tape = TapeT<float>;
using Value = ValueT<float>;

namespace detail {
template <typename T>
const ArrayT<T>& val(const ValueT<T>& v) {
    return v.tape->value(v);
}

template <typename T>
void require_same_tape(const ValueT<T>& a, const ValueT<T>& b, const char* op) {
    if (a.tape != b.tape || a.tape == nullptr) {
        throw std::invalid_argument(std::string(op) + ": operands from different tapes");
    }
}

template <typename T>
void require_same_shape(const ValueT<T>& a, const ValueT<T>& b, const char* op) {
    if (!val(a).same_shape(val(b))) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    ArrayT<T>::shape_string(val(a).shape()) + " vs " +
                                    ArrayT<T>::shape_string(val(b).shape()));
    }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
ValueT<T> add(ValueT<T> a, ValueT<T> b) {
    detail::require_same_tape(a, b, "add");
    detail::require_same_shape(a, b, "add");
    const auto& av = detail::val(a);
    const auto& bv = detail::val(b);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    // The node id is known before emit() since nodes append at the end.
    int aid = a.id, bid = b.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, bid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        auto& gb = t.grad_buf(bid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid, bid}, backward, "add");
}

template <typename T>
ValueT<T> sub(ValueT<T> a, ValueT<T> b) {
    detail::require_same_tape(a, b, "sub");
    detail::require_same_shape(a, b, "sub");
    const auto& av = detail::val(a);
    const auto& bv = detail::val(b);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    int aid = a.id, bid = b.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, bid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        auto& gb = t.grad_buf(bid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid, bid}, backward, "sub");
}

template <typename T>
ValueT<T> mul(ValueT<T> a, ValueT<T> b) {
    detail::require_same_tape(a, b, "mul");
    detail::require_same_shape(a, b, "mul");
    const auto& av = detail::val(a);
    const auto& bv = detail::val(b);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    int aid = a.id, bid = b.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, bid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& av2 = t.node(aid).value;
        const auto& bv2 = t.node(bid).value;
        auto& ga = t.grad_buf(aid);
        auto& gb = t.grad_buf(bid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av2[i];
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid, bid}, backward, "mul");
}

template <typename T>
ValueT<T> scale(ValueT<T> a, T c) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, c](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "scale");
}

template <typename T>
ValueT<T> add_scalar(ValueT<T> a, T c) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "add_scalar");
}

// out = a ⊙ w with w a constant weight buffer (no gradient into w).
template <typename T>
ValueT<T> weight_elem(ValueT<T> a, std::vector<T> w) {
    const auto& av = detail::val(a);
    if (w.size() != av.numel()) throw std::invalid_argument("weight_elem: weight length mismatch");
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * w[i];
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, w](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * w[i];
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "weight_elem");
}

template <typename T>
ValueT<T> relu(ValueT<T> a) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& av2 = t.node(aid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av2[i] > T(0)) ga[i] += g[i];
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "relu");
}

template <typename T>
ValueT<T> exp(ValueT<T> a) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& ov = t.node(oid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i];
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "exp");
}

template <typename T>
ValueT<T> abs(ValueT<T> a) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(av[i]);
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        // Subgradient 0 at the kink.
        const auto& g = t.grad_buf(oid);
        const auto& av2 = t.node(aid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (av2[i] > T(0)) ga[i] += g[i];
            else if (av2[i] < T(0)) ga[i] -= g[i];
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "abs");
}

// Elementwise x^e for x ≥ 0 and constant exponent e ≥ 0. At x = 0 with
// e < 1 the derivative is defined as 0 (subgradient choice that keeps
// gradients finite on the boundary of the domain).
template <typename T>
ValueT<T> pow_const(ValueT<T> a, T e) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (av[i] < T(0)) throw std::invalid_argument("pow_const: negative base");
        out[i] = std::pow(av[i], e);
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, e](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& av2 = t.node(aid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (e == T(0)) continue;
            if (av2[i] == T(0)) {
                if (e > T(1)) continue;           // derivative 0
                if (e == T(1)) { ga[i] += g[i]; continue; }
                continue;                          // e < 1: subgradient 0
            }
            ga[i] += g[i] * e * std::pow(av2[i], e - T(1));
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "pow_const");
}

// sqrt with a zero subgradient at 0 (used as the p-th root of a mean of
// non-negative terms; exactly-zero input means identical samples, where
// 0 is a valid subgradient).
template <typename T>
ValueT<T> sqrt_or_zero(ValueT<T> a) {
    const auto& av = detail::val(a);
    std::vector<T> out(av.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (av[i] < T(0)) throw std::invalid_argument("sqrt_or_zero: negative input");
        out[i] = std::sqrt(av[i]);
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& ov = t.node(oid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (ov[i] > T(0)) ga[i] += g[i] / (T(2) * ov[i]);
        }
    };
    return a.tape->emit(av.shape(), std::move(out), {aid}, backward, "sqrt_or_zero");
}

// ---------------------------------------------------------------------------
// Linear algebra and structure ops
// ---------------------------------------------------------------------------

template <typename T>
ValueT<T> matmul(ValueT<T> a, ValueT<T> b) {
    detail::require_same_tape(a, b, "matmul");
    ArrayT<T> prod = matmul(detail::val(a), detail::val(b));  // shape-checked kernel
    int aid = a.id, bid = b.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, bid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& av = t.node(aid).value;
        const auto& bv = t.node(bid).value;
        const std::size_t n = av.shape()[0], m = av.shape()[1], p = bv.shape()[1];
        auto& ga = t.grad_buf(aid);
        auto& gb = t.grad_buf(bid);
        // dA = G · Bᵀ
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < m; ++k) {
                T acc = T(0);
                const T* gi = g.data() + i * p;
                const T* bk = bv.data() + k * p;
                for (std::size_t j = 0; j < p; ++j) acc += gi[j] * bk[j];
                ga[i * m + k] += acc;
            }
        }
        // dB = Aᵀ · G
        for (std::size_t k = 0; k < m; ++k) {
            T* gbk = gb.data() + k * p;
            for (std::size_t i = 0; i < n; ++i) {
                const T aik = av[i * m + k];
                const T* gi = g.data() + i * p;
                for (std::size_t j = 0; j < p; ++j) gbk[j] += aik * gi[j];
            }
        }
    };
    return a.tape->emit_array(std::move(prod), {aid, bid}, backward, "matmul");
}

template <typename T>
ValueT<T> add_rowvec(ValueT<T> a, ValueT<T> bias) {
    detail::require_same_tape(a, bias, "add_rowvec");
    ArrayT<T> out = add_rowvec(detail::val(a), detail::val(bias));
    int aid = a.id, bid = bias.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, bid, oid](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& av = t.node(aid).value;
        const std::size_t n = av.shape()[0], k = av.shape()[1];
        auto& ga = t.grad_buf(aid);
        auto& gb = t.grad_buf(bid);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                ga[i * k + j] += g[i * k + j];
                gb[j] += g[i * k + j];
            }
    };
    return a.tape->emit_array(std::move(out), {aid, bid}, backward, "add_rowvec");
}

// Row-wise log-softmax of a [n × k] logit matrix.
template <typename T>
ValueT<T> log_softmax_rows(ValueT<T> a) {
    const auto& av = detail::val(a);
    if (av.ndim() != 2) throw std::invalid_argument("log_softmax_rows: expected 2-D logits");
    const std::size_t n = av.shape()[0], k = av.shape()[1];
    std::vector<T> out(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = av.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        const T lse = mx + std::log(sum);
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = row[j] - lse;
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, n, k](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        const auto& ov = t.node(oid).value;
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < n; ++i) {
            T gsum = T(0);
            for (std::size_t j = 0; j < k; ++j) gsum += g[i * k + j];
            for (std::size_t j = 0; j < k; ++j) {
                ga[i * k + j] += g[i * k + j] - std::exp(ov[i * k + j]) * gsum;
            }
        }
    };
    return a.tape->emit({n, k}, std::move(out), {aid}, backward, "log_softmax_rows");
}

// out[i] = a[i, labels[i]] — per-row gather used by the supervised losses.
template <typename T>
ValueT<T> select_labels(ValueT<T> a, const std::vector<int>& labels) {
    const auto& av = detail::val(a);
    if (av.ndim() != 2) throw std::invalid_argument("select_labels: expected 2-D input");
    const std::size_t n = av.shape()[0], k = av.shape()[1];
    if (labels.size() != n) throw std::invalid_argument("select_labels: label count mismatch");
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw std::invalid_argument("select_labels: label " + std::to_string(labels[i]) + " out of range [0, " +
                                        std::to_string(k) + ")");
        }
        out[i] = av[i * k + labels[i]];
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, labels, k](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i * k + labels[i]] += g[i];
    };
    return a.tape->emit({n}, std::move(out), {aid}, backward, "select_labels");
}

// Column j of a [n × S] matrix as a length-n vector.
template <typename T>
ValueT<T> col(ValueT<T> a, std::size_t j) {
    const auto& av = detail::val(a);
    if (av.ndim() != 2 || j >= av.shape()[1]) throw std::invalid_argument("col: bad column index");
    const std::size_t n = av.shape()[0], s = av.shape()[1];
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i * s + j];
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, j, s](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i * s + j] += g[i];
    };
    return a.tape->emit({n}, std::move(out), {aid}, backward, "col");
}

// out[i] = a[perm[i]] on a 1-D vector; realizes differentiation through a
// sort by freezing the permutation found at forward time.
template <typename T>
ValueT<T> gather(ValueT<T> a, std::vector<std::size_t> perm) {
    const auto& av = detail::val(a);
    if (av.ndim() != 1) throw std::invalid_argument("gather: expected 1-D input");
    std::vector<T> out(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= av.numel()) throw std::invalid_argument("gather: index out of range");
        out[i] = av[perm[i]];
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, perm](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[perm[i]] += g[i];
    };
    return a.tape->emit({perm.size()}, std::move(out), {aid}, backward, "gather");
}

// Row subset of a [n × z] matrix.
template <typename T>
ValueT<T> select_rows(ValueT<T> a, std::vector<std::size_t> rows) {
    const auto& av = detail::val(a);
    if (av.ndim() != 2) throw std::invalid_argument("select_rows: expected 2-D input");
    if (rows.empty()) throw std::invalid_argument("select_rows: empty row set");
    const std::size_t z = av.shape()[1];
    std::vector<T> out(rows.size() * z);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= av.shape()[0]) throw std::invalid_argument("select_rows: row out of range");
        for (std::size_t j = 0; j < z; ++j) out[i * z + j] = av[rows[i] * z + j];
    }
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, rows, z](TapeT<T>& t) {
        const auto& g = t.grad_buf(oid);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < z; ++j) ga[rows[i] * z + j] += g[i * z + j];
    };
    return a.tape->emit({rows.size(), z}, std::move(out), {aid}, backward, "select_rows");
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
ValueT<T> sum_all(ValueT<T> a) {
    const auto& av = detail::val(a);
    T s = T(0);
    for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid](TapeT<T>& t) {
        const T g = t.grad_buf(oid)[0];
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return a.tape->emit({1}, {s}, {aid}, backward, "sum_all");
}

template <typename T>
ValueT<T> mean_all(ValueT<T> a) {
    const auto& av = detail::val(a);
    const std::size_t n = av.numel();
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) s += av[i];
    s /= static_cast<T>(n);
    int aid = a.id, oid = static_cast<int>(a.tape->size());
    auto backward = [aid, oid, n](TapeT<T>& t) {
        const T g = t.grad_buf(oid)[0] / static_cast<T>(n);
        auto& ga = t.grad_buf(aid);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return a.tape->emit({1}, {s}, {aid}, backward, "mean_all");
}

// Sum of many scalar nodes in one node (keeps slice averaging shallow).
template <typename T>
ValueT<T> sum_of(std::span<const ValueT<T>> xs) {
    if (xs.empty()) throw std::invalid_argument("sum_of: empty operand list");
    TapeT<T>* tape = xs[0].tape;
    T s = T(0);
    std::vector<int> parents;
    parents.reserve(xs.size());
    for (const auto& x : xs) {
        if (x.tape != tape) throw std::invalid_argument("sum_of: operands from different tapes");
        if (detail::val(x).numel() != 1) throw std::invalid_argument("sum_of: expected scalar operands");
        s += detail::val(x)[0];
        parents.push_back(x.id);
    }
    int oid = static_cast<int>(tape->size());
    std::vector<int> pcopy = parents;
    auto backward = [pcopy, oid](TapeT<T>& t) {
        const T g = t.grad_buf(oid)[0];
        for (int pid : pcopy) t.grad_buf(pid)[0] += g;
    };
    return tape->emit({1}, {s}, std::move(parents), backward, "sum_of");
}

// ---------------------------------------------------------------------------
// Top-level gradient entry point: the gradient of a scalar-valued function
// of a parameter list, evaluated by recording one forward pass.
// ---------------------------------------------------------------------------

template <typename T, typename F>
std::vector<ArrayT<T>> grad(F&& loss_fn, const std::vector<ArrayT<T>>& params) {
    TapeT<T> tape;
    std::vector<ValueT<T>> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p));
    ValueT<T> loss = loss_fn(tape, leaves);
    if (loss.tape != &tape) throw std::invalid_argument("grad: loss_fn returned a value from a different tape");
    return tape.gradients(loss, std::span<const ValueT<T>>(leaves));
}

}  // namespace mdf
