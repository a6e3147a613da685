#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdf/array.hpp"
#include "mdf/common.hpp"

namespace mdf {

// ---------------------------------------------------------------------------
// Profiles and parameters
// ---------------------------------------------------------------------------

// Long-tailed class mix. Defaults reproduce the challenge training
// distribution proportionally (10 vehicle classes, sedan-dominated).
struct ClassProfile {
    std::vector<double> proportions = {0.7972, 0.0956, 0.0520, 0.0362,  0.0059,
                                       0.0029, 0.00281, 0.00212, 0.00286, 0.00215};
    std::vector<std::string> names = {"sedan",         "suv",        "pickup_truck", "van",
                                      "box_truck",     "motorcycle", "flatbed_truck", "bus",
                                      "pickup_trailer", "flatbed_trailer"};
    std::size_t total = 2938;

    std::size_t classes() const { return proportions.size(); }

    void validate() const {
        if (proportions.size() < 2) throw std::invalid_argument("profile: need at least 2 classes");
        if (names.size() != proportions.size()) throw std::invalid_argument("profile: names/proportions mismatch");
        double sum = 0.0;
        for (double p : proportions) {
            if (p <= 0.0) throw std::invalid_argument("profile: proportions must be positive");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-3) throw std::invalid_argument("profile: proportions must sum to 1 within 1e-3");
    }
};

// Cross-domain shift model and split sizing. Domain A (EO analog) adds
// Gaussian pixel noise to the class prototype; domain B (SAR analog)
// applies a fixed invertible distortion R = blur ∘ permutation and
// multiplies by unit-mean speckle.
struct GenParams {
    std::size_t grid = 8;
    double eo_noise_sigma = 0.10;
    double speckle_sigma = 0.60;
    double blur_weight = 0.30;  // must stay < 0.5 so R is invertible
    std::size_t val_per_class = 30;
    std::size_t test_per_class = 50;

    std::size_t input_dim() const { return grid * grid; }

    void validate() const {
        if (grid < 2) throw std::invalid_argument("gen: grid must be >= 2");
        if (blur_weight < 0.0 || blur_weight >= 0.5) {
            throw std::invalid_argument("gen: blur_weight must be in [0, 0.5)");
        }
        if (eo_noise_sigma < 0.0 || speckle_sigma < 0.0) throw std::invalid_argument("gen: negative noise sigma");
        if (val_per_class == 0 || test_per_class == 0) throw std::invalid_argument("gen: empty val/test split");
    }
};

enum class AugOp : std::uint8_t { Rot90 = 0, Rot180 = 1, Rot270 = 2, HFlip = 3, VFlip = 4 };
inline constexpr int kNumAugOps = 5;

// One object observed in both domains. Augmented copies record where they
// came from so the pairing can be re-derived from the generator streams.
struct PairedSample {
    Array eo;   // [g·g] flattened
    Array sar;  // [g·g] flattened
    int label = 0;
    std::int64_t pair_id = 0;
    std::int64_t origin_pair = 0;  // == pair_id for generated samples
    bool augmented = false;
    AugOp aug_op = AugOp::Rot90;
};

// Unlabeled view: deliberately no label field — the training path cannot
// read what the type does not carry.
struct UnlabeledView {
    Array input;
    std::int64_t pair_id = 0;
};

struct DatasetBundle {
    std::vector<PairedSample> labeled;
    std::vector<PairedSample> val;
    std::vector<PairedSample> test;
    std::vector<UnlabeledView> unlabeled_eo;
    std::vector<UnlabeledView> unlabeled_sar;
    // Withheld ground truth for the unlabeled pools (same order as the
    // pools); consulted only by oracles and canary tests.
    std::vector<int> unlabeled_truth;

    ClassProfile profile;
    GenParams params;
    std::uint64_t seed = 0;
    std::vector<std::size_t> labeled_counts;

    std::int64_t max_pair_id() const {
        std::int64_t m = -1;
        for (const auto& s : labeled) m = std::max(m, s.pair_id);
        for (const auto& s : val) m = std::max(m, s.pair_id);
        for (const auto& s : test) m = std::max(m, s.pair_id);
        return m;
    }
};

// ---------------------------------------------------------------------------
// Generator internals, exposed for the ledger oracles
// ---------------------------------------------------------------------------

namespace gen {

inline Array class_prototype(std::uint64_t seed, const GenParams& params, int class_id) {
    std::mt19937_64 rng(mix_seed(seed, salt::kPrototype, static_cast<std::uint64_t>(class_id)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<float> v(params.input_dim());
    for (auto& x : v) x = static_cast<float>(uni(rng));
    return Array::unchecked({params.input_dim()}, std::move(v));
}

inline std::vector<std::size_t> distortion_permutation(std::uint64_t seed, const GenParams& params) {
    std::vector<std::size_t> perm(params.input_dim());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, salt::kDistortion));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

// y = (1−β)·x + β·mean(4-neighbourhood), edges use the neighbours present.
inline Array blur(const Array& flat, std::size_t g, double beta) {
    std::vector<float> out(flat.numel());
    for (std::size_t r = 0; r < g; ++r) {
        for (std::size_t c = 0; c < g; ++c) {
            double acc = 0.0;
            int cnt = 0;
            if (r > 0) { acc += flat[(r - 1) * g + c]; ++cnt; }
            if (r + 1 < g) { acc += flat[(r + 1) * g + c]; ++cnt; }
            if (c > 0) { acc += flat[r * g + c - 1]; ++cnt; }
            if (c + 1 < g) { acc += flat[r * g + c + 1]; ++cnt; }
            out[r * g + c] = static_cast<float>((1.0 - beta) * flat[r * g + c] + beta * acc / cnt);
        }
    }
    return Array::unchecked(flat.shape(), std::move(out));
}

inline Array apply_distortion(const Array& flat, const std::vector<std::size_t>& perm, std::size_t g, double beta) {
    std::vector<float> permuted(flat.numel());
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = flat[perm[i]];
    return blur(Array::unchecked(flat.shape(), std::move(permuted)), g, beta);
}

// The per-pair noise draws, re-derivable from (seed, pair_id). Draw order
// is fixed: EO additive noise first, then the speckle field.
struct PairNoise {
    std::vector<float> eo_additive;
    std::vector<float> speckle;
};

inline PairNoise pair_noise(std::uint64_t seed, const GenParams& params, std::int64_t pair_id) {
    std::mt19937_64 rng(mix_seed(seed, salt::kPair, static_cast<std::uint64_t>(pair_id)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    PairNoise n;
    n.eo_additive.resize(params.input_dim());
    n.speckle.resize(params.input_dim());
    for (auto& v : n.eo_additive) v = static_cast<float>(gauss(rng) * params.eo_noise_sigma);
    const double s = params.speckle_sigma;
    for (auto& v : n.speckle) v = static_cast<float>(std::exp(gauss(rng) * s - 0.5 * s * s));
    return n;
}

inline PairedSample make_pair(std::uint64_t seed, const GenParams& params, const std::vector<std::size_t>& perm,
                              int label, std::int64_t pair_id) {
    const Array proto = class_prototype(seed, params, label);
    const PairNoise noise = pair_noise(seed, params, pair_id);
    std::vector<float> eo(params.input_dim());
    for (std::size_t i = 0; i < eo.size(); ++i) eo[i] = proto[i] + noise.eo_additive[i];
    Array distorted = apply_distortion(proto, perm, params.grid, params.blur_weight);
    std::vector<float> sar(params.input_dim());
    for (std::size_t i = 0; i < sar.size(); ++i) sar[i] = distorted[i] * noise.speckle[i];
    PairedSample s;
    s.eo = Array::unchecked({params.input_dim()}, std::move(eo));
    s.sar = Array::unchecked({params.input_dim()}, std::move(sar));
    s.label = label;
    s.pair_id = pair_id;
    s.origin_pair = pair_id;
    return s;
}

}  // namespace gen

// Per-class labeled counts: round half up, minimum one sample per class
// (too-small scales are an error naming the class), then the largest class
// absorbs the rounding residual so the total is exact.
inline std::vector<std::size_t> class_counts(const ClassProfile& profile) {
    profile.validate();
    std::vector<std::size_t> counts(profile.classes());
    std::size_t sum = 0;
    std::size_t largest = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        const double exact = profile.proportions[j] * static_cast<double>(profile.total);
        counts[j] = static_cast<std::size_t>(std::floor(exact + 0.5));
        if (counts[j] == 0) {
            throw std::invalid_argument("generate: total " + std::to_string(profile.total) +
                                        " is too small for class " + std::to_string(j) + " ('" + profile.names[j] +
                                        "', proportion " + std::to_string(profile.proportions[j]) + ")");
        }
        sum += counts[j];
        if (profile.proportions[j] > profile.proportions[largest]) largest = j;
    }
    const std::int64_t residual = static_cast<std::int64_t>(profile.total) - static_cast<std::int64_t>(sum);
    const std::int64_t adjusted = static_cast<std::int64_t>(counts[largest]) + residual;
    if (adjusted < 1) throw std::invalid_argument("generate: rounding residual exceeds largest class");
    counts[largest] = static_cast<std::size_t>(adjusted);
    return counts;
}

// Fully seed-deterministic paired two-domain dataset. Pair ids run over
// labeled, then validation, then test samples; the unlabeled pools are the
// validation∪test views with labels withheld.
inline DatasetBundle generate(const ClassProfile& profile, const GenParams& params, std::uint64_t seed) {
    params.validate();
    DatasetBundle bundle;
    bundle.profile = profile;
    bundle.params = params;
    bundle.seed = seed;
    bundle.labeled_counts = class_counts(profile);

    const auto perm = gen::distortion_permutation(seed, params);
    std::int64_t pair_id = 0;
    for (std::size_t j = 0; j < bundle.labeled_counts.size(); ++j) {
        for (std::size_t i = 0; i < bundle.labeled_counts[j]; ++i) {
            bundle.labeled.push_back(gen::make_pair(seed, params, perm, static_cast<int>(j), pair_id++));
        }
    }
    for (std::size_t j = 0; j < profile.classes(); ++j) {
        for (std::size_t i = 0; i < params.val_per_class; ++i) {
            bundle.val.push_back(gen::make_pair(seed, params, perm, static_cast<int>(j), pair_id++));
        }
    }
    for (std::size_t j = 0; j < profile.classes(); ++j) {
        for (std::size_t i = 0; i < params.test_per_class; ++i) {
            bundle.test.push_back(gen::make_pair(seed, params, perm, static_cast<int>(j), pair_id++));
        }
    }
    for (const auto* split : {&bundle.val, &bundle.test}) {
        for (const auto& s : *split) {
            bundle.unlabeled_eo.push_back({s.eo, s.pair_id});
            bundle.unlabeled_sar.push_back({s.sar, s.pair_id});
            bundle.unlabeled_truth.push_back(s.label);
        }
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Augmentation (exact dihedral transforms on square grids)
// ---------------------------------------------------------------------------

inline Array augment(const Array& flat, AugOp op) {
    const std::size_t n = flat.numel();
    const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (g * g != n) throw std::invalid_argument("augment: input of length " + std::to_string(n) + " is not square");
    std::vector<float> out(n);
    for (std::size_t r = 0; r < g; ++r) {
        for (std::size_t c = 0; c < g; ++c) {
            std::size_t sr = r, sc = c;
            switch (op) {
                case AugOp::Rot90: sr = c; sc = g - 1 - r; break;
                case AugOp::Rot180: sr = g - 1 - r; sc = g - 1 - c; break;
                case AugOp::Rot270: sr = g - 1 - c; sc = r; break;
                case AugOp::HFlip: sr = r; sc = g - 1 - c; break;
                case AugOp::VFlip: sr = g - 1 - r; sc = c; break;
            }
            out[r * g + c] = flat[sr * g + sc];
        }
    }
    return Array::unchecked(flat.shape(), std::move(out));
}

inline AugOp random_aug_op(std::mt19937_64& rng) {
    return static_cast<AugOp>(std::uniform_int_distribution<int>(0, kNumAugOps - 1)(rng));
}

// ---------------------------------------------------------------------------
// Curation to fixed per-class counts
// ---------------------------------------------------------------------------

// Classes above their target are downsampled without replacement; classes
// below are filled with augmented copies of original members, both views
// transformed with the same op so the pairing contract survives.
inline DatasetBundle curate(const DatasetBundle& bundle, std::size_t head_target, std::size_t tail_target,
                            std::size_t head_class_count, std::uint64_t seed) {
    if (head_target == 0 || tail_target == 0) throw std::invalid_argument("curate: targets must be >= 1");
    const std::size_t k = bundle.profile.classes();
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < bundle.labeled.size(); ++i) {
        by_class[bundle.labeled[i].label].push_back(i);
    }

    DatasetBundle out = bundle;
    out.labeled.clear();
    std::int64_t next_pair = bundle.max_pair_id() + 1;
    for (std::size_t j = 0; j < k; ++j) {
        if (by_class[j].empty()) throw std::invalid_argument("curate: class " + std::to_string(j) + " is empty");
        const std::size_t target = j < head_class_count ? head_target : tail_target;
        std::mt19937_64 rng(mix_seed(seed, salt::kCurate, static_cast<std::uint64_t>(j)));
        std::vector<std::size_t> members = by_class[j];
        if (members.size() >= target) {
            std::shuffle(members.begin(), members.end(), rng);
            members.resize(target);
            for (std::size_t idx : members) out.labeled.push_back(bundle.labeled[idx]);
        } else {
            for (std::size_t idx : members) out.labeled.push_back(bundle.labeled[idx]);
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            for (std::size_t i = members.size(); i < target; ++i) {
                const PairedSample& src = bundle.labeled[members[pick(rng)]];
                const AugOp op = random_aug_op(rng);
                PairedSample aug;
                aug.eo = augment(src.eo, op);
                aug.sar = augment(src.sar, op);
                aug.label = src.label;
                aug.pair_id = next_pair++;
                aug.origin_pair = src.origin_pair;
                aug.augmented = true;
                aug.aug_op = op;
                out.labeled.push_back(aug);
            }
        }
    }
    std::vector<std::size_t> counts(k, 0);
    for (const auto& s : out.labeled) counts[s.label]++;
    out.labeled_counts = counts;
    return out;
}

// ---------------------------------------------------------------------------
// Weighted sampling (per-item weight 1/n_i → equal class mass)
// ---------------------------------------------------------------------------

// Infinite stream of (class, member index) draws with replacement. The
// per-item pick weight is 1/n_i, so each class carries mass n_i·(1/n_i):
// classes are drawn uniformly, members uniformly within the class.
class WeightedSampler {
  public:
    WeightedSampler(std::vector<std::size_t> counts, std::uint64_t seed)
        : counts_(std::move(counts)), rng_(seed) {
        if (counts_.empty()) throw std::invalid_argument("sampler: no classes");
        cumulative_.reserve(counts_.size());
        double acc = 0.0;
        for (std::size_t n : counts_) {
            if (n == 0) throw std::invalid_argument("sampler: class with zero count");
            acc += static_cast<double>(n) * (1.0 / static_cast<double>(n));  // per-item 1/n_i
            cumulative_.push_back(acc);
        }
        total_mass_ = acc;
    }

    std::pair<int, std::size_t> next() {
        const double u = std::uniform_real_distribution<double>(0.0, total_mass_)(rng_);
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        const auto cls = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
            it - cumulative_.begin(), static_cast<std::ptrdiff_t>(counts_.size()) - 1));
        const std::size_t member = std::uniform_int_distribution<std::size_t>(0, counts_[cls] - 1)(rng_);
        return {static_cast<int>(cls), member};
    }

    const std::vector<std::size_t>& counts() const { return counts_; }

  private:
    std::vector<std::size_t> counts_;
    std::vector<double> cumulative_;
    double total_mass_ = 0.0;
    std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Batch iteration
// ---------------------------------------------------------------------------

enum class SamplerKind { Weighted, Uniform };

struct Batch {
    std::vector<std::size_t> labeled;        // indices into bundle.labeled
    std::vector<std::size_t> unlabeled_eo;   // indices into bundle.unlabeled_eo
    std::vector<std::size_t> unlabeled_sar;  // indices into bundle.unlabeled_sar
};

// Draws labeled paired batches (pairing intact by construction: one index
// selects both views) and, on independently seeded streams, uniform
// with-replacement unlabeled batches from each domain pool.
class BatchStream {
  public:
    BatchStream(const DatasetBundle& bundle, std::size_t batch_size, SamplerKind kind, bool use_unlabeled,
                std::uint64_t seed)
        : bundle_(&bundle),
          batch_size_(batch_size),
          kind_(kind),
          use_unlabeled_(use_unlabeled),
          labeled_rng_(mix_seed(seed, salt::kLabeled)),
          unlab_eo_rng_(mix_seed(seed, salt::kUnlabEo)),
          unlab_sar_rng_(mix_seed(seed, salt::kUnlabSar)) {
        if (batch_size_ == 0) throw std::invalid_argument("batches: batch size must be >= 1");
        if (bundle.labeled.empty()) throw std::invalid_argument("batches: empty labeled pool");
        if (use_unlabeled_ && (bundle.unlabeled_eo.empty() || bundle.unlabeled_sar.empty())) {
            throw std::invalid_argument("batches: empty unlabeled pool");
        }
        std::vector<std::size_t> counts(bundle.profile.classes(), 0);
        class_members_.resize(bundle.profile.classes());
        for (std::size_t i = 0; i < bundle.labeled.size(); ++i) {
            counts[bundle.labeled[i].label]++;
            class_members_[bundle.labeled[i].label].push_back(i);
        }
        std::vector<std::size_t> nonzero;
        class_index_.clear();
        for (std::size_t j = 0; j < counts.size(); ++j) {
            if (counts[j] > 0) {
                nonzero.push_back(counts[j]);
                class_index_.push_back(j);
            }
        }
        if (kind_ == SamplerKind::Weighted) {
            sampler_.emplace(nonzero, mix_seed(seed, salt::kLabeled, 0x57));
        }
    }

    // Batches per epoch under with-replacement sampling.
    std::size_t steps_per_epoch() const {
        return (bundle_->labeled.size() + batch_size_ - 1) / batch_size_;
    }

    Batch next() {
        Batch b;
        b.labeled.reserve(batch_size_);
        for (std::size_t i = 0; i < batch_size_; ++i) {
            if (sampler_.has_value()) {
                auto [cls, member] = sampler_->next();
                b.labeled.push_back(class_members_[class_index_[cls]][member]);
            } else {
                b.labeled.push_back(
                    std::uniform_int_distribution<std::size_t>(0, bundle_->labeled.size() - 1)(labeled_rng_));
            }
        }
        if (use_unlabeled_) {
            b.unlabeled_eo.reserve(batch_size_);
            b.unlabeled_sar.reserve(batch_size_);
            for (std::size_t i = 0; i < batch_size_; ++i) {
                b.unlabeled_eo.push_back(std::uniform_int_distribution<std::size_t>(
                    0, bundle_->unlabeled_eo.size() - 1)(unlab_eo_rng_));
                b.unlabeled_sar.push_back(std::uniform_int_distribution<std::size_t>(
                    0, bundle_->unlabeled_sar.size() - 1)(unlab_sar_rng_));
            }
        }
        return b;
    }

  private:
    const DatasetBundle* bundle_;
    std::size_t batch_size_;
    SamplerKind kind_;
    bool use_unlabeled_;
    std::vector<std::vector<std::size_t>> class_members_;
    std::vector<std::size_t> class_index_;
    std::optional<WeightedSampler> sampler_;
    std::mt19937_64 labeled_rng_;
    std::mt19937_64 unlab_eo_rng_;
    std::mt19937_64 unlab_sar_rng_;
};

// Gathers the actual arrays for a batch: [B x d] matrices per domain.
inline Array gather_eo(const std::vector<PairedSample>& pool, const std::vector<std::size_t>& idx) {
    const std::size_t d = pool.at(0).eo.numel();
    std::vector<float> out(idx.size() * d);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& v = pool[idx[i]].eo;
        std::copy(v.data(), v.data() + d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return Array::unchecked({idx.size(), d}, std::move(out));
}

inline Array gather_sar(const std::vector<PairedSample>& pool, const std::vector<std::size_t>& idx) {
    const std::size_t d = pool.at(0).sar.numel();
    std::vector<float> out(idx.size() * d);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& v = pool[idx[i]].sar;
        std::copy(v.data(), v.data() + d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return Array::unchecked({idx.size(), d}, std::move(out));
}

inline Array gather_unlabeled(const std::vector<UnlabeledView>& pool, const std::vector<std::size_t>& idx) {
    const std::size_t d = pool.at(0).input.numel();
    std::vector<float> out(idx.size() * d);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& v = pool[idx[i]].input;
        std::copy(v.data(), v.data() + d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return Array::unchecked({idx.size(), d}, std::move(out));
}

inline std::vector<int> gather_labels(const std::vector<PairedSample>& pool, const std::vector<std::size_t>& idx) {
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = pool[idx[i]].label;
    return labels;
}

}  // namespace mdf
