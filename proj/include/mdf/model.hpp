#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdf/autodiff.hpp"
#include "mdf/common.hpp"

namespace mdf {

enum class Domain { EO, SAR };

inline const char* domain_name(Domain d) { return d == Domain::EO ? "eo" : "sar"; }

// Layer widths of one encoder stack plus the classifier width.
struct ArchConfig {
    std::size_t input_dim = 64;
    std::vector<std::size_t> hidden = {128, 64};
    std::size_t latent_dim = 32;
    std::size_t classes = 10;
    bool shared_head = false;
};

// "wide" and "deep" stand in for the two backbone variants that get
// ensembled; same latent width, different stacking.
inline std::vector<std::size_t> arch_preset(const std::string& name) {
    if (name == "wide") return {128, 64};
    if (name == "deep") return {64, 64, 64};
    throw std::invalid_argument("unknown arch preset '" + name + "' (expected wide|deep)");
}

// Multi-layer rectifier encoder: input_dim -> hidden... -> latent_dim.
// Hidden layers apply the rectifier; the latent readout is affine.
template <typename T>
struct EncoderParamsT {
    std::vector<ArrayT<T>> weights;  // [in × out] per layer
    std::vector<ArrayT<T>> biases;   // [out] per layer

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        if (weights.empty()) return dims;
        dims.push_back(weights[0].shape()[0]);
        for (const auto& w : weights) dims.push_back(w.shape()[1]);
        return dims;
    }
};

template <typename T>
struct ClassifierParamsT {
    ArrayT<T> weight;  // [z × k]
    ArrayT<T> bias;    // [k]
};

template <typename T>
struct LatentBatchT {
    ArrayT<T> latents;  // [n × z]
    Domain domain = Domain::EO;
};

// Twin architecture: θ = (eo_encoder, eo_head), θ' = (sar_encoder,
// sar_head) over a shared latent dimension. With shared_head the SAR path
// aliases the EO head (single source of truth).
template <typename T>
struct TwinModelT {
    EncoderParamsT<T> eo_encoder;
    ClassifierParamsT<T> eo_head;
    EncoderParamsT<T> sar_encoder;
    ClassifierParamsT<T> sar_head;
    std::size_t latent_dim = 0;
    bool shared_head = false;

    const EncoderParamsT<T>& encoder(Domain d) const { return d == Domain::EO ? eo_encoder : sar_encoder; }
    EncoderParamsT<T>& encoder(Domain d) { return d == Domain::EO ? eo_encoder : sar_encoder; }
    const ClassifierParamsT<T>& head(Domain d) const {
        return (d == Domain::EO || shared_head) ? eo_head : sar_head;
    }
    ClassifierParamsT<T>& head(Domain d) { return (d == Domain::EO || shared_head) ? eo_head : sar_head; }
};

using EncoderParams = EncoderParamsT<float>;
using ClassifierParams = ClassifierParamsT<float>;
using LatentBatch = LatentBatchT<float>;
using TwinModel = TwinModelT<float>;

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
ArrayT<T> he_normal(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<T> w(fan_in * fan_out);
    for (auto& v : w) v = static_cast<T>(gauss(rng));
    return ArrayT<T>::unchecked({fan_in, fan_out}, std::move(w));
}

template <typename T>
EncoderParamsT<T> init_encoder(const ArchConfig& arch, std::mt19937_64& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(arch.input_dim);
    for (std::size_t h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.latent_dim);
    EncoderParamsT<T> enc;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        enc.weights.push_back(he_normal<T>(dims[i], dims[i + 1], rng));
        enc.biases.push_back(ArrayT<T>::zeros({dims[i + 1]}));
    }
    return enc;
}

template <typename T>
ClassifierParamsT<T> init_head(const ArchConfig& arch, std::mt19937_64& rng) {
    return {he_normal<T>(arch.latent_dim, arch.classes, rng), ArrayT<T>::zeros({arch.classes})};
}

}  // namespace detail

// Fan-in-scaled zero-mean weights (variance 2/fan_in), zero biases; the
// draw order (eo encoder, eo head, sar encoder, sar head) is part of the
// determinism contract.
template <typename T>
TwinModelT<T> init_twin(const ArchConfig& arch, std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.latent_dim == 0) throw std::invalid_argument("init_twin: invalid dims");
    if (arch.classes < 2) throw std::invalid_argument("init_twin: need at least 2 classes");
    for (std::size_t h : arch.hidden)
        if (h == 0) throw std::invalid_argument("init_twin: zero-width hidden layer");
    std::mt19937_64 rng(mix_seed(seed, salt::kInitTwin));
    TwinModelT<T> model;
    model.latent_dim = arch.latent_dim;
    model.shared_head = arch.shared_head;
    model.eo_encoder = detail::init_encoder<T>(arch, rng);
    model.eo_head = detail::init_head<T>(arch, rng);
    model.sar_encoder = detail::init_encoder<T>(arch, rng);
    model.sar_head = detail::init_head<T>(arch, rng);
    return model;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

template <typename T>
LatentBatchT<T> encode(const EncoderParamsT<T>& enc, const ArrayT<T>& inputs, Domain domain = Domain::EO) {
    if (inputs.ndim() != 2) throw std::invalid_argument("encode: expected [n × d] inputs");
    if (inputs.shape()[0] == 0) throw std::invalid_argument("encode: empty batch");
    if (enc.weights.empty() || inputs.shape()[1] != enc.weights[0].shape()[0]) {
        throw std::invalid_argument("encode: input dim does not match encoder");
    }
    ArrayT<T> h = inputs;
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
        h = add_rowvec(matmul(h, enc.weights[l]), enc.biases[l]);
        if (l + 1 < enc.weights.size()) h = relu(h);
    }
    return {std::move(h), domain};
}

template <typename T>
ArrayT<T> classify(const ClassifierParamsT<T>& head, const LatentBatchT<T>& latents) {
    if (latents.latents.shape()[1] != head.weight.shape()[0]) {
        throw std::invalid_argument("classify: latent dim does not match head");
    }
    return add_rowvec(matmul(latents.latents, head.weight), head.bias);
}

// Tape-recorded variants used by training. Parameter handles come from
// lift_* so gradients can be read for every weight.
template <typename T>
struct EncoderVarsT {
    std::vector<ValueT<T>> weights;
    std::vector<ValueT<T>> biases;
};

template <typename T>
struct HeadVarsT {
    ValueT<T> weight;
    ValueT<T> bias;
};

template <typename T>
EncoderVarsT<T> lift(TapeT<T>& tape, const EncoderParamsT<T>& enc) {
    EncoderVarsT<T> vars;
    for (const auto& w : enc.weights) vars.weights.push_back(tape.leaf(w));
    for (const auto& b : enc.biases) vars.biases.push_back(tape.leaf(b));
    return vars;
}

template <typename T>
HeadVarsT<T> lift(TapeT<T>& tape, const ClassifierParamsT<T>& head) {
    return {tape.leaf(head.weight), tape.leaf(head.bias)};
}

template <typename T>
ValueT<T> encode(TapeT<T>& tape, const EncoderVarsT<T>& enc, ValueT<T> inputs) {
    if (tape.value(inputs).shape()[0] == 0) throw std::invalid_argument("encode: empty batch");
    ValueT<T> h = inputs;
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
        h = add_rowvec(matmul(h, enc.weights[l]), enc.biases[l]);
        if (l + 1 < enc.weights.size()) h = relu(h);
    }
    return h;
}

template <typename T>
ValueT<T> classify(TapeT<T>& tape, const HeadVarsT<T>& head, ValueT<T> latents) {
    (void)tape;
    return add_rowvec(matmul(latents, head.weight), head.bias);
}

// ---------------------------------------------------------------------------
// Weight transfer
// ---------------------------------------------------------------------------

// Copies a trained encoder into the selected branch; the other branch and
// both heads are untouched. Architectures must match exactly.
template <typename T>
TwinModelT<T> transfer_encoder(const EncoderParamsT<T>& source, TwinModelT<T> target, Domain which) {
    const auto& dst = target.encoder(which);
    if (source.layer_dims() != dst.layer_dims()) {
        throw std::invalid_argument("transfer_encoder: architecture mismatch between source and target encoder");
    }
    target.encoder(which) = source;
    return target;
}

}  // namespace mdf
