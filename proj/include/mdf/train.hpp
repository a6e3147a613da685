#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdf/data.hpp"
#include "mdf/fuse.hpp"
#include "mdf/losses.hpp"
#include "mdf/model.hpp"
#include "mdf/optim.hpp"

namespace mdf {

struct TrainConfig {
    double lambda = 1.0;
    double eta = 1.0;
    FocalConfig focal;
    SupervisedLoss loss = SupervisedLoss::Focal;
    int epochs = 100;
    int pretrain_epochs = 15;
    std::size_t batch = 64;
    LrSchedule lr;
    SwdConfig swd;
    ArchConfig arch;
    Seeds seeds;
    bool use_curation = true;
    bool use_sampler = true;
    bool use_unlabeled = true;
    std::size_t head_target = 700;
    std::size_t tail_target = 550;
    std::size_t head_class_count = 4;  // classes [0, head_class_count) are heads
    double grad_clip = 0.0;            // global-norm clip; 0 disables (default off)
    bool record_batch_breakdowns = false;

    void validate() const {
        if (epochs < 0 || pretrain_epochs < 0) throw std::invalid_argument("config: negative epoch count");
        if (batch == 0) throw std::invalid_argument("config: batch must be >= 1");
        if (lambda < 0.0 || eta < 0.0) throw std::invalid_argument("config: lambda/eta must be >= 0");
    }
};

struct EpochRecord {
    LossBreakdown loss;  // means over the epoch's batches
    double val_top1_eo = 0.0;
    double val_top1_sar = 0.0;
    double val_top1_fused = 0.0;
    double lr = 0.0;
    double wall_seconds = 0.0;                   // not serialized; timing only
    std::vector<LossBreakdown> batch_breakdowns; // populated only on request
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

// Thrown when a loss term stops being finite; carries the epoch for the
// abort diagnostic and lets the CLI flush partial history.
class TrainDivergence : public std::runtime_error {
  public:
    TrainDivergence(int epoch, const std::string& what)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

  private:
    int epoch_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalMetrics {
    double top1 = 0.0;
    std::vector<double> per_class;
    std::vector<std::vector<int>> confusion;  // rows: true class, cols: predicted
};

namespace detail {

inline EvalMetrics metrics_from_predictions(const std::vector<int>& pred, const std::vector<int>& labels,
                                            std::size_t classes) {
    if (pred.size() != labels.size() || pred.empty()) throw std::invalid_argument("metrics: size mismatch");
    EvalMetrics m;
    m.confusion.assign(classes, std::vector<int>(classes, 0));
    std::vector<int> per_class_total(classes, 0);
    int correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        m.confusion[labels[i]][pred[i]]++;
        per_class_total[labels[i]]++;
        if (pred[i] == labels[i]) ++correct;
    }
    m.top1 = static_cast<double>(correct) / static_cast<double>(pred.size());
    m.per_class.assign(classes, 0.0);
    for (std::size_t j = 0; j < classes; ++j) {
        if (per_class_total[j] > 0) {
            m.per_class[j] = static_cast<double>(m.confusion[j][j]) / per_class_total[j];
        }
    }
    return m;
}

inline Array head_probs(const TwinModel& model, const std::vector<PairedSample>& split, Domain domain) {
    std::vector<std::size_t> idx(split.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Array inputs = domain == Domain::EO ? gather_eo(split, idx) : gather_sar(split, idx);
    LatentBatch lat = encode(model.encoder(domain), inputs, domain);
    return softmax_rows(classify(model.head(domain), lat));
}

}  // namespace detail

inline EvalMetrics evaluate(const TwinModel& model, const std::vector<PairedSample>& split, Domain domain) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    Array probs = detail::head_probs(model, split, domain);
    const std::size_t k = probs.shape()[1];
    std::vector<int> pred(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) {
        int best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (probs.at2(i, j) > probs.at2(i, best)) best = static_cast<int>(j);
        pred[i] = best;
    }
    std::vector<int> labels(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) labels[i] = split[i].label;
    return detail::metrics_from_predictions(pred, labels, k);
}

inline EvalMetrics evaluate_fused(const TwinModel& model, const std::vector<PairedSample>& split,
                                  const FusionWeights& weights) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    Array probs_eo = detail::head_probs(model, split, Domain::EO);
    Array probs_sar = detail::head_probs(model, split, Domain::SAR);
    std::vector<int> pred = fuse_predict(weights, probs_eo, probs_sar);
    std::vector<int> labels(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) labels[i] = split[i].label;
    return detail::metrics_from_predictions(pred, labels, probs_eo.shape()[1]);
}

// Fusion weights are always fit on the validation split.
inline FusionWeights fit_fusion_on_val(const TwinModel& model, const DatasetBundle& bundle) {
    Array probs_eo = detail::head_probs(model, bundle.val, Domain::EO);
    Array probs_sar = detail::head_probs(model, bundle.val, Domain::SAR);
    std::vector<int> labels(bundle.val.size());
    for (std::size_t i = 0; i < bundle.val.size(); ++i) labels[i] = bundle.val[i].label;
    return fit_fusion(probs_eo, probs_sar, labels);
}

// ---------------------------------------------------------------------------
// Single-branch supervised training (stage one, and the single-model
// ablation baselines)
// ---------------------------------------------------------------------------

struct PretrainResult {
    EncoderParams encoder;
    ClassifierParams head;
    std::vector<double> epoch_loss;  // mean supervised loss per epoch
};

namespace detail {

struct SingleVars {
    EncoderVarsT<float> enc;
    HeadVarsT<float> head;
    std::vector<Value> all;
};

inline SingleVars lift_single(Tape& tape, const EncoderParams& enc, const ClassifierParams& head) {
    SingleVars v;
    v.enc = lift(tape, enc);
    v.head = lift(tape, head);
    for (auto w : v.enc.weights) v.all.push_back(w);
    for (auto b : v.enc.biases) v.all.push_back(b);
    v.all.push_back(v.head.weight);
    v.all.push_back(v.head.bias);
    return v;
}

inline void unpack_single(const std::vector<Array>& flat, EncoderParams& enc, ClassifierParams& head) {
    std::size_t i = 0;
    for (auto& w : enc.weights) w = flat[i++];
    for (auto& b : enc.biases) b = flat[i++];
    head.weight = flat[i++];
    head.bias = flat[i++];
}

inline std::vector<Array> pack_single(const EncoderParams& enc, const ClassifierParams& head) {
    std::vector<Array> flat;
    for (const auto& w : enc.weights) flat.push_back(w);
    for (const auto& b : enc.biases) flat.push_back(b);
    flat.push_back(head.weight);
    flat.push_back(head.bias);
    return flat;
}

inline void clip_global_norm(std::vector<Array>& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& g : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) sq += static_cast<double>(g[i]) * g[i];
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const auto s = static_cast<float>(max_norm / norm);
    for (auto& g : grads) {
        std::vector<float> v = g.values();
        for (auto& x : v) x *= s;
        g = Array::unchecked(g.shape(), std::move(v));
    }
}

}  // namespace detail

struct SingleTrainOptions {
    Domain domain = Domain::EO;
    int epochs = 15;
    bool use_sampler = false;  // weighted 1/n_i stream vs plain shuffled passes
    std::optional<EncoderParams> warm_start_encoder;
    std::uint64_t init_salt = salt::kInitPre;
    std::uint64_t order_salt = salt::kPretrain;
};

// Supervised training of one encoder+head on the given domain's labeled
// views. Stage-one pretraining uses plain shuffled passes over the
// uncurated, unresampled pool; the single-model ablation baselines reuse
// this loop with the weighted sampler and an optional warm-start encoder.
inline PretrainResult train_single(const DatasetBundle& bundle, const TrainConfig& cfg,
                                   const SingleTrainOptions& opt) {
    if (bundle.labeled.empty()) throw std::invalid_argument("train_single: no labeled data");
    std::mt19937_64 init_rng(mix_seed(cfg.seeds.init, opt.init_salt));
    EncoderParams enc = detail::init_encoder<float>(cfg.arch, init_rng);
    ClassifierParams head = detail::init_head<float>(cfg.arch, init_rng);
    if (opt.warm_start_encoder.has_value()) {
        if (opt.warm_start_encoder->layer_dims() != enc.layer_dims()) {
            throw std::invalid_argument("train_single: warm-start encoder architecture mismatch");
        }
        enc = *opt.warm_start_encoder;
    }

    PretrainResult out;
    if (opt.epochs == 0) {
        out.encoder = std::move(enc);
        out.head = std::move(head);
        return out;
    }

    std::vector<Array> params = detail::pack_single(enc, head);
    AdamState state = AdamState::init(params);
    std::mt19937_64 order_rng(mix_seed(cfg.seeds.train, opt.order_salt));
    std::vector<std::size_t> order(bundle.labeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::optional<BatchStream> stream;
    if (opt.use_sampler) {
        stream.emplace(bundle, cfg.batch, SamplerKind::Weighted, false, mix_seed(cfg.seeds.train, opt.order_salt));
    }

    LrSchedule sched = cfg.lr;
    sched.total_epochs = std::max(sched.total_epochs, opt.epochs);
    const std::size_t steps_per_epoch = (order.size() + cfg.batch - 1) / cfg.batch;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        if (!opt.use_sampler) std::shuffle(order.begin(), order.end(), order_rng);
        const double lr = lr_at(sched, epoch);
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<std::size_t> idx;
            if (opt.use_sampler) {
                idx = stream->next().labeled;
            } else {
                const std::size_t start = step * cfg.batch;
                const std::size_t stop = std::min(order.size(), start + cfg.batch);
                idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            }
            Array inputs =
                opt.domain == Domain::EO ? gather_eo(bundle.labeled, idx) : gather_sar(bundle.labeled, idx);
            std::vector<int> labels = gather_labels(bundle.labeled, idx);
            try {
                detail::unpack_single(params, enc, head);
                Tape tape;
                detail::SingleVars vars = detail::lift_single(tape, enc, head);
                Value latents = encode(tape, vars.enc, tape.leaf(inputs));
                Value logits = classify(tape, vars.head, latents);
                Value loss = cfg.loss == SupervisedLoss::Focal ? focal_loss(tape, logits, labels, cfg.focal)
                                                               : cross_entropy(tape, logits, labels);
                loss_sum += tape.value(loss)[0];
                ++steps;
                std::vector<Array> grads = tape.gradients(loss, std::span<const Value>(vars.all));
                detail::clip_global_norm(grads, cfg.grad_clip);
                auto result = adam_step(params, grads, state, static_cast<float>(lr));
                params = std::move(result.params);
                state = std::move(result.state);
            } catch (const std::runtime_error& e) {
                throw TrainDivergence(epoch, e.what());
            }
        }
        out.epoch_loss.push_back(loss_sum / static_cast<double>(steps));
    }
    detail::unpack_single(params, enc, head);
    out.encoder = std::move(enc);
    out.head = std::move(head);
    return out;
}

inline PretrainResult pretrain(const DatasetBundle& bundle, const ArchConfig& arch, const TrainConfig& cfg) {
    TrainConfig local = cfg;
    local.arch = arch;
    SingleTrainOptions opt;
    opt.domain = Domain::EO;
    opt.epochs = cfg.pretrain_epochs;
    return train_single(bundle, local, opt);
}

// SAR-side single-model baseline used by the ablation grid.
inline PretrainResult train_single_sar(const DatasetBundle& working, const TrainConfig& cfg,
                                       const std::optional<EncoderParams>& warm_start) {
    SingleTrainOptions opt;
    opt.domain = Domain::SAR;
    opt.epochs = cfg.epochs;
    opt.use_sampler = cfg.use_sampler;
    opt.warm_start_encoder = warm_start;
    opt.init_salt = salt::kInitTwin;
    opt.order_salt = salt::kLabeled;
    return train_single(working, cfg, opt);
}

// ---------------------------------------------------------------------------
// Joint two-stage training
// ---------------------------------------------------------------------------

namespace detail {

struct TwinVars {
    EncoderVarsT<float> eo_enc, sar_enc;
    HeadVarsT<float> eo_head, sar_head;
    std::vector<Value> all;
};

// Parameter order: eo encoder, eo head, sar encoder, [sar head unless the
// head is shared]. Matches the checkpoint layout.
inline TwinVars lift_twin(Tape& tape, const TwinModel& model) {
    TwinVars v;
    v.eo_enc = lift(tape, model.eo_encoder);
    v.eo_head = lift(tape, model.eo_head);
    v.sar_enc = lift(tape, model.sar_encoder);
    v.sar_head = model.shared_head ? v.eo_head : lift(tape, model.sar_head);
    for (auto w : v.eo_enc.weights) v.all.push_back(w);
    for (auto b : v.eo_enc.biases) v.all.push_back(b);
    v.all.push_back(v.eo_head.weight);
    v.all.push_back(v.eo_head.bias);
    for (auto w : v.sar_enc.weights) v.all.push_back(w);
    for (auto b : v.sar_enc.biases) v.all.push_back(b);
    if (!model.shared_head) {
        v.all.push_back(v.sar_head.weight);
        v.all.push_back(v.sar_head.bias);
    }
    return v;
}

inline std::vector<Array> pack_twin(const TwinModel& m) {
    std::vector<Array> flat;
    for (const auto& w : m.eo_encoder.weights) flat.push_back(w);
    for (const auto& b : m.eo_encoder.biases) flat.push_back(b);
    flat.push_back(m.eo_head.weight);
    flat.push_back(m.eo_head.bias);
    for (const auto& w : m.sar_encoder.weights) flat.push_back(w);
    for (const auto& b : m.sar_encoder.biases) flat.push_back(b);
    if (!m.shared_head) {
        flat.push_back(m.sar_head.weight);
        flat.push_back(m.sar_head.bias);
    }
    return flat;
}

inline void unpack_twin(const std::vector<Array>& flat, TwinModel& m) {
    std::size_t i = 0;
    for (auto& w : m.eo_encoder.weights) w = flat[i++];
    for (auto& b : m.eo_encoder.biases) b = flat[i++];
    m.eo_head.weight = flat[i++];
    m.eo_head.bias = flat[i++];
    for (auto& w : m.sar_encoder.weights) w = flat[i++];
    for (auto& b : m.sar_encoder.biases) b = flat[i++];
    if (!m.shared_head) {
        m.sar_head.weight = flat[i++];
        m.sar_head.bias = flat[i++];
    } else {
        m.sar_head = m.eo_head;
    }
}

}  // namespace detail

struct TrainResult {
    TwinModel model;
    TrainHistory history;
};

// Stage one pretrains an encoder+head on the original imbalanced EO pool;
// the encoder transfers into the SAR branch (the EO branch keeps its fresh
// initialization, and the pretraining head is not transferred). Stage two
// minimizes the composite objective jointly over every twin parameter;
// the SWD terms reach only the encoders by construction. Completed epochs
// are mirrored into *progress so a divergence abort can flush them.
inline TrainResult train_mdf(const DatasetBundle& bundle, const TrainConfig& cfg, TrainHistory* progress = nullptr) {
    cfg.validate();
    TwinModel model = init_twin<float>(cfg.arch, cfg.seeds.init);
    if (cfg.pretrain_epochs > 0) {
        PretrainResult pre = pretrain(bundle, cfg.arch, cfg);
        model = transfer_encoder(pre.encoder, std::move(model), Domain::SAR);
    }

    const DatasetBundle working = cfg.use_curation
                                      ? curate(bundle, cfg.head_target, cfg.tail_target, cfg.head_class_count,
                                               cfg.seeds.data)
                                      : bundle;

    TrainResult out;
    out.model = model;
    if (cfg.epochs == 0) return out;

    BatchStream stream(working, cfg.batch, cfg.use_sampler ? SamplerKind::Weighted : SamplerKind::Uniform,
                       cfg.use_unlabeled, cfg.seeds.train);
    const std::size_t steps = stream.steps_per_epoch();

    std::vector<Array> params = detail::pack_twin(model);
    AdamState state = AdamState::init(params);
    LrSchedule sched = cfg.lr;
    sched.total_epochs = std::max(sched.total_epochs, cfg.epochs);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const double lr = lr_at(sched, epoch);
        EpochRecord rec;
        rec.lr = lr;
        double sum_feo = 0, sum_fsar = 0, sum_marg = 0, sum_cond = 0, sum_total = 0;
        for (std::size_t step = 0; step < steps; ++step) {
            Batch batch = stream.next();
            Array eo_in = gather_eo(working.labeled, batch.labeled);
            Array sar_in = gather_sar(working.labeled, batch.labeled);
            std::vector<int> labels = gather_labels(working.labeled, batch.labeled);
            try {
                detail::unpack_twin(params, model);
                Tape tape;
                detail::TwinVars vars = detail::lift_twin(tape, model);
                Value lat_eo = encode(tape, vars.eo_enc, tape.leaf(eo_in));
                Value lat_sar = encode(tape, vars.sar_enc, tape.leaf(sar_in));
                Value logits_eo = classify(tape, vars.eo_head, lat_eo);
                Value logits_sar = classify(tape, vars.sar_head, lat_sar);
                std::optional<Value> unlab_eo, unlab_sar;
                if (cfg.use_unlabeled) {
                    unlab_eo = encode(tape, vars.eo_enc, tape.leaf(gather_unlabeled(working.unlabeled_eo,
                                                                                    batch.unlabeled_eo)));
                    unlab_sar = encode(tape, vars.sar_enc, tape.leaf(gather_unlabeled(working.unlabeled_sar,
                                                                                      batch.unlabeled_sar)));
                }
                SwdConfig swd_cfg = cfg.swd;
                MdfLossT<float> loss =
                    mdf_loss(tape, logits_eo, labels, logits_sar, labels, lat_eo, lat_sar, unlab_eo, unlab_sar,
                             static_cast<float>(cfg.lambda), static_cast<float>(cfg.eta), cfg.focal, swd_cfg,
                             cfg.loss);
                sum_feo += loss.breakdown.focal_eo;
                sum_fsar += loss.breakdown.focal_sar;
                sum_marg += loss.breakdown.marginal_swd;
                sum_cond += loss.breakdown.conditional_swd;
                sum_total += loss.breakdown.total;
                if (cfg.record_batch_breakdowns) rec.batch_breakdowns.push_back(loss.breakdown);
                std::vector<Array> grads = tape.gradients(loss.total, std::span<const Value>(vars.all));
                detail::clip_global_norm(grads, cfg.grad_clip);
                auto result = adam_step(params, grads, state, static_cast<float>(lr));
                params = std::move(result.params);
                state = std::move(result.state);
            } catch (const TrainDivergence&) {
                throw;
            } catch (const std::runtime_error& e) {
                throw TrainDivergence(epoch, e.what());
            }
        }
        detail::unpack_twin(params, model);
        const auto d = static_cast<double>(steps);
        rec.loss.focal_eo = static_cast<float>(sum_feo / d);
        rec.loss.focal_sar = static_cast<float>(sum_fsar / d);
        rec.loss.marginal_swd = static_cast<float>(sum_marg / d);
        rec.loss.conditional_swd = static_cast<float>(sum_cond / d);
        rec.loss.total = static_cast<float>(sum_total / d);
        rec.loss.lambda = static_cast<float>(cfg.lambda);
        rec.loss.eta = static_cast<float>(cfg.eta);

        rec.val_top1_eo = evaluate(model, bundle.val, Domain::EO).top1;
        rec.val_top1_sar = evaluate(model, bundle.val, Domain::SAR).top1;
        rec.val_top1_fused = evaluate_fused(model, bundle.val, fit_fusion_on_val(model, bundle)).top1;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        out.history.epochs.push_back(rec);
        if (progress != nullptr) progress->epochs.push_back(std::move(rec));
    }
    out.model = model;
    return out;
}

}  // namespace mdf
