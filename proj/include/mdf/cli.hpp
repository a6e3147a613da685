#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mdf/common.hpp"
#include "mdf/io.hpp"
#include "mdf/train.hpp"

namespace mdf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file (strict schema: unknown keys are rejected with their path —
// a silently ignored typo in a hyperparameter name is the costliest
// failure mode this tool has)
// ---------------------------------------------------------------------------

struct FullConfig {
    ClassProfile profile;
    GenParams gen;
    TrainConfig train;
    std::string preset = "wide";
    json snapshot;  // the parsed document, echoed into run summaries
};

namespace detail {

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw std::runtime_error("config: " + path + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw std::runtime_error("config: unknown key '" + path + (path.empty() ? "" : ".") + it.key() + "'");
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

inline int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

}  // namespace detail

inline FullConfig parse_config_json(const json& doc) {
    detail::check_keys(doc, "", {"dataset", "model", "train", "seeds"});
    FullConfig cfg;
    cfg.snapshot = doc;

    if (doc.contains("dataset")) {
        const json& d = doc.at("dataset");
        detail::check_keys(d, "dataset",
                           {"total", "grid", "proportions", "names", "eo_noise_sigma", "speckle_sigma", "blur_weight",
                            "val_per_class", "test_per_class"});
        cfg.profile.total = detail::get_or<std::size_t>(d, "total", cfg.profile.total);
        if (d.contains("proportions")) cfg.profile.proportions = d.at("proportions").get<std::vector<double>>();
        if (d.contains("names")) cfg.profile.names = d.at("names").get<std::vector<std::string>>();
        if (d.contains("proportions") && !d.contains("names")) {
            cfg.profile.names.clear();
            for (std::size_t j = 0; j < cfg.profile.proportions.size(); ++j) {
                cfg.profile.names.push_back("class_" + std::to_string(j));
            }
        }
        cfg.gen.grid = detail::get_or<std::size_t>(d, "grid", cfg.gen.grid);
        cfg.gen.eo_noise_sigma = detail::get_or<double>(d, "eo_noise_sigma", cfg.gen.eo_noise_sigma);
        cfg.gen.speckle_sigma = detail::get_or<double>(d, "speckle_sigma", cfg.gen.speckle_sigma);
        cfg.gen.blur_weight = detail::get_or<double>(d, "blur_weight", cfg.gen.blur_weight);
        cfg.gen.val_per_class = detail::get_or<std::size_t>(d, "val_per_class", cfg.gen.val_per_class);
        cfg.gen.test_per_class = detail::get_or<std::size_t>(d, "test_per_class", cfg.gen.test_per_class);
    }

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        detail::check_keys(m, "model", {"preset", "hidden", "latent_dim", "shared_head"});
        cfg.preset = detail::get_or<std::string>(m, "preset", cfg.preset);
        cfg.train.arch.hidden = m.contains("hidden") ? m.at("hidden").get<std::vector<std::size_t>>()
                                                     : arch_preset(cfg.preset);
        cfg.train.arch.latent_dim = detail::get_or<std::size_t>(m, "latent_dim", cfg.train.arch.latent_dim);
        cfg.train.arch.shared_head = detail::get_or<bool>(m, "shared_head", cfg.train.arch.shared_head);
    } else {
        cfg.train.arch.hidden = arch_preset(cfg.preset);
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        detail::check_keys(t, "train",
                           {"epochs", "pretrain_epochs", "batch", "lambda", "eta", "focal_gamma", "focal_alpha",
                            "loss", "lr_initial", "lr_decay", "lr_boundaries", "swd_slices", "swd_p", "use_curation",
                            "use_sampler", "use_unlabeled", "head_target", "tail_target", "head_class_count",
                            "grad_clip"});
        cfg.train.epochs = detail::get_or<int>(t, "epochs", cfg.train.epochs);
        cfg.train.pretrain_epochs = detail::get_or<int>(t, "pretrain_epochs", cfg.train.pretrain_epochs);
        cfg.train.batch = detail::get_or<std::size_t>(t, "batch", cfg.train.batch);
        cfg.train.lambda = detail::get_or<double>(t, "lambda", cfg.train.lambda);
        cfg.train.eta = detail::get_or<double>(t, "eta", cfg.train.eta);
        cfg.train.focal.gamma = detail::get_or<float>(t, "focal_gamma", cfg.train.focal.gamma);
        if (t.contains("focal_alpha")) cfg.train.focal.alpha = t.at("focal_alpha").get<std::vector<float>>();
        if (t.contains("loss")) {
            const std::string loss = t.at("loss").get<std::string>();
            if (loss == "focal") cfg.train.loss = SupervisedLoss::Focal;
            else if (loss == "cross_entropy") cfg.train.loss = SupervisedLoss::CrossEntropy;
            else throw std::runtime_error("config: train.loss must be 'focal' or 'cross_entropy', got '" + loss + "'");
        }
        cfg.train.lr.initial = detail::get_or<double>(t, "lr_initial", cfg.train.lr.initial);
        cfg.train.lr.decay = detail::get_or<double>(t, "lr_decay", cfg.train.lr.decay);
        if (t.contains("lr_boundaries")) cfg.train.lr.boundaries = t.at("lr_boundaries").get<std::vector<int>>();
        cfg.train.swd.num_slices = detail::get_or<int>(t, "swd_slices", cfg.train.swd.num_slices);
        cfg.train.swd.p = detail::get_or<int>(t, "swd_p", cfg.train.swd.p);
        cfg.train.use_curation = detail::get_or<bool>(t, "use_curation", cfg.train.use_curation);
        cfg.train.use_sampler = detail::get_or<bool>(t, "use_sampler", cfg.train.use_sampler);
        cfg.train.use_unlabeled = detail::get_or<bool>(t, "use_unlabeled", cfg.train.use_unlabeled);
        cfg.train.head_target = detail::get_or<std::size_t>(t, "head_target", cfg.train.head_target);
        cfg.train.tail_target = detail::get_or<std::size_t>(t, "tail_target", cfg.train.tail_target);
        cfg.train.head_class_count = detail::get_or<std::size_t>(t, "head_class_count", cfg.train.head_class_count);
        cfg.train.grad_clip = detail::get_or<double>(t, "grad_clip", cfg.train.grad_clip);
    }

    if (doc.contains("seeds")) {
        const json& s = doc.at("seeds");
        detail::check_keys(s, "seeds", {"data", "init", "train"});
        cfg.train.seeds.data = detail::get_or<std::uint64_t>(s, "data", cfg.train.seeds.data);
        cfg.train.seeds.init = detail::get_or<std::uint64_t>(s, "init", cfg.train.seeds.init);
        cfg.train.seeds.train = detail::get_or<std::uint64_t>(s, "train", cfg.train.seeds.train);
    }

    cfg.profile.validate();
    cfg.gen.validate();
    cfg.train.validate();
    cfg.train.arch.input_dim = cfg.gen.input_dim();
    cfg.train.arch.classes = cfg.profile.classes();
    // All internal streams flow from the three named seeds.
    cfg.train.swd.projection_seed = mix_seed(cfg.train.seeds.train, salt::kSlices);
    return cfg;
}

inline FullConfig parse_config_file(const std::string& path) {
    const std::string text = io::read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path + " line " + std::to_string(detail::line_of_offset(text, e.byte)) +
                                 ": " + e.what());
    }
    try {
        return parse_config_json(doc);
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Shared command plumbing
// ---------------------------------------------------------------------------

namespace detail {

inline void require_out_dir(const std::string& out_dir, bool force) {
    fs::path p(out_dir);
    if (fs::exists(p)) {
        if (!force) {
            throw std::runtime_error("output directory '" + out_dir +
                                     "' already exists; resume is not supported, pass --force to overwrite");
        }
    } else {
        fs::create_directories(p);
    }
}

inline void require_out_file(const std::string& path, bool force) {
    if (fs::exists(path) && !force) {
        throw std::runtime_error("output file '" + path + "' already exists, pass --force to overwrite");
    }
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

inline json metrics_to_json(const EvalMetrics& m, const std::vector<std::string>& names) {
    json per_class = json::object();
    for (std::size_t j = 0; j < m.per_class.size(); ++j) per_class[names[j]] = m.per_class[j];
    return json{{"top1", m.top1}, {"per_class", per_class}};
}

inline const char* run_mode(const TrainConfig& cfg) {
    return (cfg.use_unlabeled && cfg.lambda > 0.0) ? "semi-supervised" : "supervised";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

inline int run_generate(const std::string& config_path, const std::string& out_path, bool force) {
    FullConfig cfg = parse_config_file(config_path);
    detail::require_out_file(out_path, force);
    DatasetBundle bundle = generate(cfg.profile, cfg.gen, cfg.train.seeds.data);
    save_dataset(bundle, out_path);
    log::info("wrote dataset %s (%zu labeled, %zu val, %zu test)", out_path.c_str(), bundle.labeled.size(),
              bundle.val.size(), bundle.test.size());
    // Validate what landed on disk before declaring success.
    load_dataset(out_path, true);
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArtifacts {
    std::string checkpoint;
    std::string history_csv;
    std::string summary_json;
};

inline TrainArtifacts train_artifact_paths(const std::string& out_dir) {
    return {out_dir + "/checkpoint.mdfc", out_dir + "/history.csv", out_dir + "/summary.json"};
}

inline int run_train(const std::string& config_path, const std::string& dataset_path, const std::string& out_dir,
                     bool force) {
    FullConfig cfg = parse_config_file(config_path);
    detail::require_out_dir(out_dir, force);
    const TrainArtifacts paths = train_artifact_paths(out_dir);

    DatasetBundle bundle = load_dataset(dataset_path, true);
    cfg.train.arch.input_dim = bundle.params.input_dim();
    cfg.train.arch.classes = bundle.profile.classes();
    const std::string dataset_hash = io::hex64(io::fnv1a64(io::read_file(dataset_path)));

    TrainHistory progress;
    TrainResult result;
    try {
        result = train_mdf(bundle, cfg.train, &progress);
    } catch (const TrainDivergence& e) {
        io::write_file(paths.history_csv, history_to_csv(progress));
        log::info("flushed %zu completed epochs to %s", progress.epochs.size(), paths.history_csv.c_str());
        throw;
    }

    save_checkpoint(result.model, cfg.train.arch, cfg.train.seeds, paths.checkpoint);
    io::write_file(paths.history_csv, history_to_csv(result.history));

    FusionWeights fusion = fit_fusion_on_val(result.model, bundle);
    json summary;
    summary["tool_version"] = kToolVersion;
    summary["mode"] = detail::run_mode(cfg.train);
    summary["config"] = cfg.snapshot;
    summary["dataset"] = {{"path", dataset_path}, {"hash", dataset_hash}};
    summary["seeds"] = {{"data", cfg.train.seeds.data}, {"init", cfg.train.seeds.init},
                        {"train", cfg.train.seeds.train}};
    summary["artifacts"] = {{"checkpoint", paths.checkpoint}, {"history_csv", paths.history_csv},
                            {"summary_json", paths.summary_json}};
    summary["fusion"] = {{"w1", fusion.w1}, {"w2", fusion.w2}, {"residual", fusion.residual}};
    summary["metrics"] = {
        {"val",
         {{"eo", detail::metrics_to_json(evaluate(result.model, bundle.val, Domain::EO), bundle.profile.names)},
          {"sar", detail::metrics_to_json(evaluate(result.model, bundle.val, Domain::SAR), bundle.profile.names)},
          {"fused",
           detail::metrics_to_json(evaluate_fused(result.model, bundle.val, fusion), bundle.profile.names)}}},
        {"test",
         {{"eo", detail::metrics_to_json(evaluate(result.model, bundle.test, Domain::EO), bundle.profile.names)},
          {"sar", detail::metrics_to_json(evaluate(result.model, bundle.test, Domain::SAR), bundle.profile.names)},
          {"fused",
           detail::metrics_to_json(evaluate_fused(result.model, bundle.test, fusion), bundle.profile.names)}}}};
    io::write_file(paths.summary_json, summary.dump(2) + "\n");

    // Success only after every artifact re-validates.
    load_checkpoint(paths.checkpoint);
    if (io::read_file(paths.history_csv).empty()) throw std::runtime_error("history.csv failed validation");
    const json reparsed = json::parse(io::read_file(paths.summary_json));
    (void)reparsed;
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline int run_eval(const std::string& checkpoint_path, const std::string& dataset_path, const std::string& split,
                    bool fuse, const std::string& out_dir, bool force) {
    if (split != "val" && split != "test") throw std::runtime_error("--split must be 'val' or 'test'");
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    DatasetBundle bundle = load_dataset(dataset_path, true);
    if (ckpt.arch.input_dim != bundle.params.input_dim() || ckpt.arch.classes != bundle.profile.classes()) {
        throw std::runtime_error("checkpoint (d=" + std::to_string(ckpt.arch.input_dim) + ", k=" +
                                 std::to_string(ckpt.arch.classes) + ") is incompatible with dataset (d=" +
                                 std::to_string(bundle.params.input_dim()) + ", k=" +
                                 std::to_string(bundle.profile.classes()) + ")");
    }
    detail::require_out_dir(out_dir, force);

    const auto& eval_split = split == "val" ? bundle.val : bundle.test;
    EvalMetrics eo = evaluate(ckpt.model, eval_split, Domain::EO);
    EvalMetrics sar = evaluate(ckpt.model, eval_split, Domain::SAR);

    json out;
    out["tool_version"] = kToolVersion;
    out["split"] = split;
    out["eo"] = detail::metrics_to_json(eo, bundle.profile.names);
    out["sar"] = detail::metrics_to_json(sar, bundle.profile.names);
    io::write_file(out_dir + "/confusion_eo.csv", confusion_to_csv(eo, bundle.profile.names));
    io::write_file(out_dir + "/confusion_sar.csv", confusion_to_csv(sar, bundle.profile.names));

    if (fuse) {
        FusionWeights fusion = fit_fusion_on_val(ckpt.model, bundle);
        EvalMetrics fused = evaluate_fused(ckpt.model, eval_split, fusion);
        out["fusion"] = {{"w1", fusion.w1}, {"w2", fusion.w2}, {"residual", fusion.residual}};
        out["fused"] = detail::metrics_to_json(fused, bundle.profile.names);
        io::write_file(out_dir + "/confusion_fused.csv", confusion_to_csv(fused, bundle.profile.names));
    }
    io::write_file(out_dir + "/metrics.json", out.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// ablate: the seven-row switch grid, each row over N seeds
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string label;
    bool twin = false;
    bool pretrained = false;
    bool resampled = false;
    bool augmented = false;   // curation with augmentation-based upsampling
    bool supervised_mdf = false;
    bool semi_supervised_mdf = false;
    bool ensemble = false;    // two arch presets fused on the SAR outputs
    std::string reported_split;  // split highlighted in the source table
};

inline std::vector<AblationRow> ablation_rows() {
    return {
        {"single_baseline", false, false, false, false, false, false, false, "val"},
        {"single_pretrain_resample", false, true, true, false, false, false, false, "val"},
        {"single_pretrain_resample_augment", false, true, true, true, false, false, false, "val"},
        {"twin_supervised", true, true, true, false, true, false, false, "val"},
        {"twin_supervised_augment", true, true, true, true, true, false, false, "test"},
        {"twin_semi_supervised", true, true, true, true, false, true, false, "test"},
        {"twin_semi_supervised_ensemble", true, true, true, true, false, true, true, "test"},
    };
}

// Config for one grid cell. Seeds are offset per repetition so every cell
// is fully isolated.
inline TrainConfig ablation_config(const TrainConfig& base, const AblationRow& row, int rep) {
    TrainConfig cfg = base;
    cfg.seeds.init = base.seeds.init + static_cast<std::uint64_t>(rep);
    cfg.seeds.train = base.seeds.train + static_cast<std::uint64_t>(rep);
    cfg.swd.projection_seed = mix_seed(cfg.seeds.train, salt::kSlices);
    cfg.pretrain_epochs = row.pretrained ? base.pretrain_epochs : 0;
    cfg.use_sampler = row.resampled;
    cfg.use_curation = row.augmented;
    if (row.semi_supervised_mdf) {
        cfg.use_unlabeled = true;
    } else {
        cfg.use_unlabeled = false;
        cfg.lambda = 0.0;
        cfg.eta = 0.0;
    }
    return cfg;
}

struct AblationCellResult {
    double val_top1 = 0.0;
    double test_top1 = 0.0;
};

// Runs one (row, rep) cell: SAR-side accuracy, matching the source
// table's track. Single-model rows train one SAR branch; twin rows run
// the full two-stage pipeline; the ensemble row fuses the SAR outputs of
// the wide and deep presets.
inline AblationCellResult run_ablation_cell(const DatasetBundle& bundle, const TrainConfig& base,
                                            const AblationRow& row, int rep) {
    TrainConfig cfg = ablation_config(base, row, rep);
    AblationCellResult out;
    if (!row.twin) {
        DatasetBundle working = cfg.use_curation
                                    ? curate(bundle, cfg.head_target, cfg.tail_target, cfg.head_class_count,
                                             cfg.seeds.data)
                                    : bundle;
        std::optional<EncoderParams> warm;
        if (cfg.pretrain_epochs > 0) warm = pretrain(bundle, cfg.arch, cfg).encoder;
        PretrainResult single = train_single_sar(working, cfg, warm);
        TwinModel probe = init_twin<float>(cfg.arch, cfg.seeds.init);
        probe.sar_encoder = single.encoder;
        probe.sar_head = single.head;
        out.val_top1 = evaluate(probe, bundle.val, Domain::SAR).top1;
        out.test_top1 = evaluate(probe, bundle.test, Domain::SAR).top1;
        return out;
    }
    if (!row.ensemble) {
        TrainResult result = train_mdf(bundle, cfg);
        out.val_top1 = evaluate(result.model, bundle.val, Domain::SAR).top1;
        out.test_top1 = evaluate(result.model, bundle.test, Domain::SAR).top1;
        return out;
    }
    TrainConfig wide_cfg = cfg;
    wide_cfg.arch.hidden = arch_preset("wide");
    TrainConfig deep_cfg = cfg;
    deep_cfg.arch.hidden = arch_preset("deep");
    deep_cfg.seeds.init = cfg.seeds.init + 7919;  // distinct init stream for the second backbone
    TrainResult wide = train_mdf(bundle, wide_cfg);
    TrainResult deep = train_mdf(bundle, deep_cfg);

    auto sar_probs = [](const TwinModel& m, const std::vector<PairedSample>& split) {
        return mdf::detail::head_probs(m, split, Domain::SAR);
    };
    std::vector<int> val_labels, test_labels;
    for (const auto& s : bundle.val) val_labels.push_back(s.label);
    for (const auto& s : bundle.test) test_labels.push_back(s.label);
    const Array val_branches[2] = {sar_probs(wide.model, bundle.val), sar_probs(deep.model, bundle.val)};
    EnsembleWeights w = fit_ensemble(std::span<const Array>(val_branches, 2), val_labels);
    auto top1 = [](const std::vector<int>& pred, const std::vector<int>& labels) {
        int correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
        return static_cast<double>(correct) / static_cast<double>(pred.size());
    };
    out.val_top1 = top1(ensemble_predict(std::span<const Array>(val_branches, 2), w.w), val_labels);
    const Array test_branches[2] = {sar_probs(wide.model, bundle.test), sar_probs(deep.model, bundle.test)};
    out.test_top1 = top1(ensemble_predict(std::span<const Array>(test_branches, 2), w.w), test_labels);
    return out;
}

inline int run_ablate(const std::string& config_path, const std::string& dataset_path, const std::string& out_dir,
                      int n_seeds, int jobs, bool force) {
    if (n_seeds < 1) throw std::runtime_error("--seeds must be >= 1");
    if (jobs < 1) throw std::runtime_error("--jobs must be >= 1");
    FullConfig cfg = parse_config_file(config_path);
    detail::require_out_dir(out_dir, force);
    DatasetBundle bundle = load_dataset(dataset_path, true);
    cfg.train.arch.input_dim = bundle.params.input_dim();
    cfg.train.arch.classes = bundle.profile.classes();

    const std::vector<AblationRow> rows = ablation_rows();
    struct Cell {
        std::size_t row;
        int rep;
    };
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int rep = 0; rep < n_seeds; ++rep) cells.push_back({r, rep});
    }
    std::vector<AblationCellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::vector<std::string> errors;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                results[i] = run_ablation_cell(bundle, cfg.train, rows[cells[i].row], cells[i].rep);
                log::info("ablation %s rep %d: val %.4f test %.4f", rows[cells[i].row].label.c_str(), cells[i].rep,
                          results[i].val_top1, results[i].test_top1);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                errors.push_back(rows[cells[i].row].label + " rep " + std::to_string(cells[i].rep) + ": " + e.what());
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (!errors.empty()) {
        std::string msg = "ablation cells failed:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }

    auto stats = [&](std::size_t row, auto field) {
        double mean = 0.0, var = 0.0;
        std::vector<double> vals;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].row == row) vals.push_back(field(results[i]));
        }
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        for (double v : vals) var += (v - mean) * (v - mean);
        var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
        return std::pair<double, double>{mean, std::sqrt(var)};
    };

    std::string csv =
        "row,label,model,pretrained,resampled,augmented,supervised_mdf,semi_supervised_mdf,reported_split,"
        "seeds,val_top1_mean,val_top1_std,test_top1_mean,test_top1_std\n";
    char line[512];
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto [vm, vs] = stats(r, [](const AblationCellResult& c) { return c.val_top1; });
        const auto [tm, ts] = stats(r, [](const AblationCellResult& c) { return c.test_top1; });
        std::snprintf(line, sizeof(line), "%zu,%s,%s,%s,%s,%s,%s,%s,%s,%d,%.6f,%.6f,%.6f,%.6f\n", r + 1,
                      rows[r].label.c_str(), rows[r].twin ? "twin" : "single", rows[r].pretrained ? "yes" : "no",
                      rows[r].resampled ? "yes" : "no", rows[r].augmented ? "yes" : "no",
                      rows[r].supervised_mdf ? "yes" : "no", rows[r].semi_supervised_mdf ? "yes" : "no",
                      rows[r].reported_split.c_str(), n_seeds, vm, vs, tm, ts);
        csv += line;
    }
    io::write_file(out_dir + "/ablation.csv", csv);
    return 0;
}

}  // namespace mdf::cli
