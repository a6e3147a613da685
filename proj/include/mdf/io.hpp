#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdf/data.hpp"
#include "mdf/model.hpp"
#include "mdf/train.hpp"

namespace mdf {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

namespace io {

// ---------------------------------------------------------------------------
// Byte-level helpers (everything on disk is little-endian)
// ---------------------------------------------------------------------------

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
  public:
    ByteReader(const std::string& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string take(std::size_t n) {
        require(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    void require(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw std::runtime_error(name_ + ": truncated file");
    }
    const std::string& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

// FNV-1a 64-bit over raw bytes; the dataset-integrity hash.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace io

// ---------------------------------------------------------------------------
// Dataset file: binary payload (magic "MDFD", version, float views in
// pair-id order interleaved EO-then-SAR) plus a JSON manifest alongside
// (<path>.json) holding the profile, seeds, shift params, split layout,
// labels ledger and the payload hash.
// ---------------------------------------------------------------------------

inline std::string dataset_manifest_path(const std::string& dataset_path) { return dataset_path + ".json"; }

inline void save_dataset(const DatasetBundle& bundle, const std::string& path) {
    std::map<std::int64_t, const PairedSample*> by_id;
    for (const auto* split : {&bundle.labeled, &bundle.val, &bundle.test}) {
        for (const auto& s : *split) {
            if (s.augmented) throw std::invalid_argument("save_dataset: curated bundles are not serializable");
            if (!by_id.emplace(s.pair_id, &s).second) {
                throw std::invalid_argument("save_dataset: duplicate pair id " + std::to_string(s.pair_id));
            }
        }
    }

    std::string payload;
    payload.reserve(8 + by_id.size() * bundle.params.input_dim() * 8);
    payload += "MDFD";
    io::put_u32(payload, kDatasetFormatVersion);
    for (const auto& [id, sample] : by_id) {
        for (std::size_t i = 0; i < sample->eo.numel(); ++i) io::put_f32(payload, sample->eo[i]);
        for (std::size_t i = 0; i < sample->sar.numel(); ++i) io::put_f32(payload, sample->sar[i]);
    }
    io::write_file(path, payload);

    nlohmann::json manifest;
    manifest["format_version"] = kDatasetFormatVersion;
    manifest["tool_version"] = kToolVersion;
    manifest["payload_hash"] = io::hex64(io::fnv1a64(payload));
    manifest["seed"] = bundle.seed;
    manifest["profile"] = {{"proportions", bundle.profile.proportions},
                           {"names", bundle.profile.names},
                           {"total", bundle.profile.total}};
    manifest["generator"] = {{"grid", bundle.params.grid},
                             {"eo_noise_sigma", bundle.params.eo_noise_sigma},
                             {"speckle_sigma", bundle.params.speckle_sigma},
                             {"blur_weight", bundle.params.blur_weight},
                             {"val_per_class", bundle.params.val_per_class},
                             {"test_per_class", bundle.params.test_per_class}};
    std::vector<std::int64_t> ids;
    std::vector<int> labels;
    for (const auto& [id, sample] : by_id) {
        ids.push_back(id);
        labels.push_back(sample->label);
    }
    manifest["pair_ids"] = ids;
    manifest["labels"] = labels;
    auto split_ids = [](const std::vector<PairedSample>& split) {
        std::vector<std::int64_t> out;
        out.reserve(split.size());
        for (const auto& s : split) out.push_back(s.pair_id);
        return out;
    };
    manifest["splits"] = {{"labeled", split_ids(bundle.labeled)},
                          {"val", split_ids(bundle.val)},
                          {"test", split_ids(bundle.test)}};
    io::write_file(dataset_manifest_path(path), manifest.dump(2) + "\n");
}

inline DatasetBundle load_dataset(const std::string& path, bool verify_hash = true) {
    const std::string payload = io::read_file(path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_file(dataset_manifest_path(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("dataset manifest " + dataset_manifest_path(path) + ": " + e.what());
    }

    const auto file_version = manifest.at("format_version").get<std::uint32_t>();
    if (file_version != kDatasetFormatVersion) {
        throw std::runtime_error("dataset format version " + std::to_string(file_version) +
                                 " is not supported by this tool (version " + std::to_string(kDatasetFormatVersion) +
                                 ")");
    }
    if (verify_hash) {
        const std::string expect = manifest.at("payload_hash").get<std::string>();
        const std::string got = io::hex64(io::fnv1a64(payload));
        if (expect != got) {
            throw std::runtime_error("dataset " + path + " failed integrity check: manifest hash " + expect +
                                     ", file hash " + got);
        }
    }

    io::ByteReader reader(payload, path);
    if (reader.take(4) != "MDFD") throw std::runtime_error(path + ": bad magic, not a dataset file");
    const std::uint32_t bin_version = reader.u32();
    if (bin_version != kDatasetFormatVersion) {
        throw std::runtime_error("dataset binary version " + std::to_string(bin_version) +
                                 " is not supported by this tool (version " + std::to_string(kDatasetFormatVersion) +
                                 ")");
    }

    DatasetBundle bundle;
    bundle.seed = manifest.at("seed").get<std::uint64_t>();
    bundle.profile.proportions = manifest.at("profile").at("proportions").get<std::vector<double>>();
    bundle.profile.names = manifest.at("profile").at("names").get<std::vector<std::string>>();
    bundle.profile.total = manifest.at("profile").at("total").get<std::size_t>();
    const auto& g = manifest.at("generator");
    bundle.params.grid = g.at("grid").get<std::size_t>();
    bundle.params.eo_noise_sigma = g.at("eo_noise_sigma").get<double>();
    bundle.params.speckle_sigma = g.at("speckle_sigma").get<double>();
    bundle.params.blur_weight = g.at("blur_weight").get<double>();
    bundle.params.val_per_class = g.at("val_per_class").get<std::size_t>();
    bundle.params.test_per_class = g.at("test_per_class").get<std::size_t>();

    const auto ids = manifest.at("pair_ids").get<std::vector<std::int64_t>>();
    const auto labels = manifest.at("labels").get<std::vector<int>>();
    if (ids.size() != labels.size()) throw std::runtime_error(path + ": manifest pair_ids/labels length mismatch");
    const std::size_t d = bundle.params.input_dim();
    if (reader.remaining() != ids.size() * d * 2 * 4) {
        throw std::runtime_error(path + ": payload size does not match manifest (" +
                                 std::to_string(reader.remaining()) + " bytes for " + std::to_string(ids.size()) +
                                 " pairs)");
    }

    std::map<std::int64_t, PairedSample> by_id;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        PairedSample s;
        std::vector<float> eo(d), sar(d);
        for (std::size_t j = 0; j < d; ++j) eo[j] = reader.f32();
        for (std::size_t j = 0; j < d; ++j) sar[j] = reader.f32();
        s.eo = Array::unchecked({d}, std::move(eo));
        s.sar = Array::unchecked({d}, std::move(sar));
        s.label = labels[i];
        s.pair_id = ids[i];
        s.origin_pair = ids[i];
        by_id.emplace(ids[i], std::move(s));
    }

    auto take_split = [&](const char* name) {
        std::vector<PairedSample> out;
        for (std::int64_t id : manifest.at("splits").at(name).get<std::vector<std::int64_t>>()) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw std::runtime_error(path + ": split references unknown pair id");
            out.push_back(it->second);
        }
        return out;
    };
    bundle.labeled = take_split("labeled");
    bundle.val = take_split("val");
    bundle.test = take_split("test");
    for (const auto* split : {&bundle.val, &bundle.test}) {
        for (const auto& s : *split) {
            bundle.unlabeled_eo.push_back({s.eo, s.pair_id});
            bundle.unlabeled_sar.push_back({s.sar, s.pair_id});
            bundle.unlabeled_truth.push_back(s.label);
        }
    }
    bundle.labeled_counts.assign(bundle.profile.classes(), 0);
    for (const auto& s : bundle.labeled) bundle.labeled_counts[s.label]++;
    return bundle;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "MDFC", version, length-prefixed JSON header, then the
// parameter arrays as little-endian f32 in declared order (eo encoder
// layer weights/biases, eo head, sar encoder, sar head).
// ---------------------------------------------------------------------------

namespace io {
inline void put_params(std::string& out, const EncoderParams& enc) {
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
        for (std::size_t i = 0; i < enc.weights[l].numel(); ++i) put_f32(out, enc.weights[l][i]);
        for (std::size_t i = 0; i < enc.biases[l].numel(); ++i) put_f32(out, enc.biases[l][i]);
    }
}

inline void put_params(std::string& out, const ClassifierParams& head) {
    for (std::size_t i = 0; i < head.weight.numel(); ++i) put_f32(out, head.weight[i]);
    for (std::size_t i = 0; i < head.bias.numel(); ++i) put_f32(out, head.bias[i]);
}

inline EncoderParams read_encoder(ByteReader& r, const ArchConfig& arch) {
    std::vector<std::size_t> dims;
    dims.push_back(arch.input_dim);
    for (std::size_t h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.latent_dim);
    EncoderParams enc;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        std::vector<float> w(dims[l] * dims[l + 1]);
        for (auto& v : w) v = r.f32();
        enc.weights.push_back(Array::unchecked({dims[l], dims[l + 1]}, std::move(w)));
        std::vector<float> b(dims[l + 1]);
        for (auto& v : b) v = r.f32();
        enc.biases.push_back(Array::unchecked({dims[l + 1]}, std::move(b)));
    }
    return enc;
}

inline ClassifierParams read_head(ByteReader& r, const ArchConfig& arch) {
    std::vector<float> w(arch.latent_dim * arch.classes);
    for (auto& v : w) v = r.f32();
    std::vector<float> b(arch.classes);
    for (auto& v : b) v = r.f32();
    return {Array::unchecked({arch.latent_dim, arch.classes}, std::move(w)),
            Array::unchecked({arch.classes}, std::move(b))};
}
}  // namespace io

struct Checkpoint {
    TwinModel model;
    ArchConfig arch;
    Seeds seeds;
};

inline void save_checkpoint(const TwinModel& model, const ArchConfig& arch, const Seeds& seeds,
                            const std::string& path) {
    nlohmann::json header;
    header["arch"] = {{"input_dim", arch.input_dim},
                      {"hidden", arch.hidden},
                      {"latent_dim", arch.latent_dim},
                      {"classes", arch.classes},
                      {"shared_head", arch.shared_head}};
    header["seeds"] = {{"data", seeds.data}, {"init", seeds.init}, {"train", seeds.train}};
    header["tool_version"] = kToolVersion;
    const std::string header_bytes = header.dump();

    std::string out;
    out += "MDFC";
    io::put_u32(out, kCheckpointFormatVersion);
    io::put_u32(out, static_cast<std::uint32_t>(header_bytes.size()));
    out += header_bytes;
    io::put_params(out, model.eo_encoder);
    io::put_params(out, model.eo_head);
    io::put_params(out, model.sar_encoder);
    io::put_params(out, model.head(Domain::SAR));  // alias of the EO head when shared
    io::write_file(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader r(bytes, path);
    if (r.take(4) != "MDFC") throw std::runtime_error(path + ": bad magic, not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointFormatVersion) {
        throw std::runtime_error("checkpoint format version " + std::to_string(version) +
                                 " is not supported by this tool (version " +
                                 std::to_string(kCheckpointFormatVersion) + ")");
    }
    const std::uint32_t header_len = r.u32();
    nlohmann::json header = nlohmann::json::parse(r.take(header_len));

    Checkpoint ckpt;
    ckpt.arch.input_dim = header.at("arch").at("input_dim").get<std::size_t>();
    ckpt.arch.hidden = header.at("arch").at("hidden").get<std::vector<std::size_t>>();
    ckpt.arch.latent_dim = header.at("arch").at("latent_dim").get<std::size_t>();
    ckpt.arch.classes = header.at("arch").at("classes").get<std::size_t>();
    ckpt.arch.shared_head = header.at("arch").at("shared_head").get<bool>();
    ckpt.seeds.data = header.at("seeds").at("data").get<std::uint64_t>();
    ckpt.seeds.init = header.at("seeds").at("init").get<std::uint64_t>();
    ckpt.seeds.train = header.at("seeds").at("train").get<std::uint64_t>();

    ckpt.model.latent_dim = ckpt.arch.latent_dim;
    ckpt.model.shared_head = ckpt.arch.shared_head;
    ckpt.model.eo_encoder = io::read_encoder(r, ckpt.arch);
    ckpt.model.eo_head = io::read_head(r, ckpt.arch);
    ckpt.model.sar_encoder = io::read_encoder(r, ckpt.arch);
    ckpt.model.sar_head = io::read_head(r, ckpt.arch);
    if (!r.exhausted()) throw std::runtime_error(path + ": trailing bytes after parameters");
    return ckpt;
}

// ---------------------------------------------------------------------------
// History CSV (wall-clock deliberately excluded: the CSV is part of the
// bit-determinism contract)
// ---------------------------------------------------------------------------

inline std::string history_to_csv(const TrainHistory& history) {
    std::string out =
        "epoch,focal_eo,focal_sar,marginal_swd,conditional_swd,total,val_top1_eo,val_top1_sar,val_top1_fused,lr\n";
    char line[512];
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& r = history.epochs[e];
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e,
                      static_cast<double>(r.loss.focal_eo), static_cast<double>(r.loss.focal_sar),
                      static_cast<double>(r.loss.marginal_swd), static_cast<double>(r.loss.conditional_swd),
                      static_cast<double>(r.loss.total), r.val_top1_eo, r.val_top1_sar, r.val_top1_fused, r.lr);
        out += line;
    }
    return out;
}

inline std::string confusion_to_csv(const EvalMetrics& metrics, const std::vector<std::string>& names) {
    std::string out = "true_class";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (std::size_t i = 0; i < metrics.confusion.size(); ++i) {
        out += names[i];
        for (int v : metrics.confusion[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

}  // namespace mdf
