#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mdf/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Two-domain fusion trainer: twin encoders aligned with sliced-Wasserstein losses on paired "
                 "long-tailed data, with least-squares output fusion"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, checkpoint_path, out_path, split = "test";
    bool force = false, fuse = false;
    int seeds = 5, jobs = 1;

    CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic paired dataset");
    generate->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    generate->add_option("--out", out_path, "Output dataset path (.mdfd)")->required();
    generate->add_flag("--force", force, "Overwrite existing output");

    CLI::App* train = app.add_subcommand("train", "Run the two-stage training pipeline");
    train->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_path, "Output directory")->required();
    train->add_flag("--force", force, "Overwrite existing output directory");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
    eval->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"val", "test"}));
    eval->add_flag("--fuse", fuse, "Also fit fusion weights on val and report fused metrics");
    eval->add_option("--out", out_path, "Output directory")->required();
    eval->add_flag("--force", force, "Overwrite existing output directory");

    CLI::App* ablate = app.add_subcommand("ablate", "Run the ablation switch grid");
    ablate->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    ablate->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
    ablate->add_option("--out", out_path, "Output directory")->required();
    ablate->add_option("--seeds", seeds, "Repetitions per grid row");
    ablate->add_option("--jobs", jobs, "Parallel workers (one grid cell each)");
    ablate->add_flag("--force", force, "Overwrite existing output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return mdf::cli::run_generate(config_path, out_path, force);
        if (train->parsed()) return mdf::cli::run_train(config_path, dataset_path, out_path, force);
        if (eval->parsed()) return mdf::cli::run_eval(checkpoint_path, dataset_path, split, fuse, out_path, force);
        if (ablate->parsed()) return mdf::cli::run_ablate(config_path, dataset_path, out_path, seeds, jobs, force);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
