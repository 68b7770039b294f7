#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sepvae/data.hpp"
#include "sepvae/eval.hpp"
#include "sepvae/train.hpp"

namespace fs = std::filesystem;

namespace sepvae::cli {

namespace {

nlohmann::ordered_json* descend(nlohmann::ordered_json& root, const std::string& dotted_key) {
    nlohmann::ordered_json* node = &root;
    std::string rest = dotted_key;
    size_t dot;
    while ((dot = rest.find('.')) != std::string::npos) {
        node = &(*node)[rest.substr(0, dot)];
        rest = rest.substr(dot + 1);
    }
    return &(*node)[rest];
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out.good()) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in.good()) {
        throw IoError("cannot read " + path.string());
    }
    return nlohmann::json::parse(in);
}

struct LoadedData {
    ContrastiveDataset dataset;
    SplitIndices splits;
};

LoadedData load_data_dir(const std::string& data_dir, int64_t channels, int64_t height,
                         int64_t width) {
    const fs::path root(data_dir);
    if (!fs::exists(root / "labels.csv")) {
        throw IoError("data directory has no labels.csv: " + data_dir);
    }
    LoadedData out;
    out.dataset = load_image_folder(root.string(), (root / "labels.csv").string(),
                                    channels, height, width);
    if (fs::exists(root / "manifest.json")) {
        auto manifest = DatasetManifest::from_json(read_json(root / "manifest.json"));
        out.splits = manifest.splits;
    }
    if (out.splits.train.empty()) {
        out.splits = split(out.dataset, 0.8, 0.1, 0.1, 0, /*stratify_on_y=*/true);
    }
    return out;
}

TrainConfig train_config_from(const nlohmann::ordered_json& config) {
    SEPVAE_CHECK(config.contains("train"), "config has no \"train\" section");
    return TrainConfig::from_json(config.at("train"));
}

}  // namespace

nlohmann::ordered_json load_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
    std::ifstream in(config_path);
    if (!in.good()) {
        throw IoError("cannot read config file: " + config_path);
    }
    nlohmann::ordered_json config = nlohmann::ordered_json::parse(in);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        SEPVAE_CHECK(eq != std::string::npos && eq > 0,
                     "override must look like key.path=value: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        auto* node = descend(config, key);
        auto parsed = nlohmann::ordered_json::parse(value, nullptr, false);
        *node = parsed.is_discarded() ? nlohmann::ordered_json(value) : parsed;
    }
    return config;
}

std::string resolve_out_dir(const std::string& out_dir) {
    fs::path p(out_dir);
    if (p.is_absolute()) {
        return p.string();
    }
    if (const char* root = std::getenv("SEPVAE_RUNS_ROOT")) {
        return (fs::path(root) / p).string();
    }
    return p.string();
}

void cmd_gen_data(const nlohmann::ordered_json& config, const std::string& out_dir) {
    SEPVAE_CHECK(config.contains("data"), "config has no \"data\" section");
    auto data_cfg = DataGenConfig::from_json(config.at("data"));

    auto [dataset, manifest] = generate_synthetic(data_cfg);

    double f_train = 0.8, f_val = 0.1, f_test = 0.1;
    bool stratify = true;
    if (config.at("data").contains("split")) {
        const auto& s = config.at("data").at("split");
        f_train = s.value("train", f_train);
        f_val = s.value("val", f_val);
        f_test = s.value("test", f_test);
        stratify = s.value("stratify_on_y", stratify);
    }
    manifest.splits = split(dataset, f_train, f_val, f_test, data_cfg.seed, stratify);

    const std::string out = resolve_out_dir(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw IoError("cannot create output directory: " + out);
    }
    save_dataset_folder(dataset, manifest, out);
    std::cout << "wrote " << dataset.size() << " samples to " << out << "\n";
}

void cmd_train(const nlohmann::ordered_json& config, const std::string& data_dir,
               const std::string& out_dir) {
    auto cfg = train_config_from(config);
    auto data = load_data_dir(data_dir, cfg.model.image_shape[0], cfg.model.image_shape[1],
                              cfg.model.image_shape[2]);

    const std::string run_dir = resolve_out_dir(out_dir);
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) {
        throw IoError("cannot create run directory: " + run_dir);
    }
    write_json(config, fs::path(run_dir) / "config_snapshot.json");

    auto train_set = data.dataset.select(data.splits.train);
    auto result = fit(cfg, train_set, run_dir);

    // Final metrics: mean of the last epoch's loss rows.
    nlohmann::ordered_json metrics;
    if (!result.history.rows.empty()) {
        const int64_t last_epoch = result.history.rows.back().epoch;
        double sums[6] = {0, 0, 0, 0, 0, 0};
        int64_t count = 0;
        for (const auto& r : result.history.rows) {
            if (r.epoch != last_epoch) continue;
            sums[0] += r.losses.reconstruction;
            sums[1] += r.losses.kl_common;
            sums[2] += r.losses.kl_salient;
            sums[3] += r.losses.classification;
            sums[4] += r.losses.mutual_information;
            sums[5] += r.losses.total;
            ++count;
        }
        metrics = nlohmann::ordered_json{
            {"last_epoch", last_epoch},
            {"rec", sums[0] / count},
            {"kl_c", sums[1] / count},
            {"kl_s", sums[2] / count},
            {"clsf", sums[3] / count},
            {"mi", sums[4] / count},
            {"total", sums[5] / count}};
    }
    write_json(metrics, fs::path(run_dir) / "metrics.json");
    std::cout << "run complete: " << run_dir << "\n";
}

void cmd_eval(const std::string& run_dir, const std::string& data_dir) {
    const fs::path run(resolve_out_dir(run_dir));
    const fs::path checkpoint = run / "checkpoints" / "final.pt";
    if (!fs::exists(checkpoint)) {
        throw IoError("run directory has no final checkpoint: " + checkpoint.string());
    }
    auto model = load_checkpoint(checkpoint.string());
    auto data = load_data_dir(data_dir, model.config.image_shape[0],
                              model.config.image_shape[1], model.config.image_shape[2]);

    uint64_t seed = 0;
    if (fs::exists(run / "config_snapshot.json")) {
        auto snapshot = read_json(run / "config_snapshot.json");
        if (snapshot.contains("train")) {
            seed = snapshot["train"].value("seed", uint64_t{0});
        }
    }

    const fs::path eval_dir = run / "eval";
    fs::create_directories(eval_dir);
    auto metrics = evaluate_model(model, data.dataset, data.splits, seed,
                                  (eval_dir / "figures").string());
    write_json(metrics, eval_dir / "metrics.json");
    std::cout << "eval complete: " << (eval_dir / "metrics.json").string() << "\n";
}

void cmd_ablate(const nlohmann::ordered_json& config, const std::string& data_dir,
                const std::string& out_dir, const std::vector<uint64_t>& seeds) {
    auto cfg = train_config_from(config);
    auto data = load_data_dir(data_dir, cfg.model.image_shape[0], cfg.model.image_shape[1],
                              cfg.model.image_shape[2]);

    std::vector<std::string> grid = standard_ablation_grid();
    if (config.contains("ablation") && config.at("ablation").contains("grid")) {
        grid = config.at("ablation").at("grid").get<std::vector<std::string>>();
    }

    auto rows = ablation_suite(cfg, data.dataset, data.splits, grid, seeds);

    const std::string out = resolve_out_dir(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw IoError("cannot create output directory: " + out);
    }
    write_json(config, fs::path(out) / "config_snapshot.json");
    write_json(ablation_table_json(rows), fs::path(out) / "ablation.json");
    std::ofstream md(fs::path(out) / "ablation.md");
    md << "# Ablation grid\n\n" << ablation_table_markdown(rows);
    std::cout << "ablation complete: " << out << "\n";
}

void cmd_report(const std::string& run_dir) {
    const fs::path run(resolve_out_dir(run_dir));
    std::ofstream md(run / "report.md");
    if (!md.good()) {
        throw IoError("cannot write report under " + run.string());
    }
    md << "# Run report\n\n";

    if (fs::exists(run / "eval" / "metrics.json")) {
        auto metrics = read_json(run / "eval" / "metrics.json");
        md << "## Probes\n\n| space | attribute | metric | value |\n|---|---|---|---|\n";
        for (const auto& p : metrics["probes"]) {
            md << "| " << p["space"].get<std::string>() << " | "
               << p["attribute"].get<std::string>() << " | "
               << p["metric"].get<std::string>() << " | " << p["value"].dump() << " |\n";
        }
        md << "\n## Salient variance\n\ntarget/background variance ratio: "
           << metrics["variance_ratio"]["ratio_tg_over_bg"].dump() << "\n";
        if (fs::exists(run / "eval" / "figures" / "gallery.png")) {
            md << "\n## Figures\n\n![reconstructions](eval/figures/gallery.png)\n"
               << "![salient PCA](eval/figures/pca_salient.png)\n";
        }
    }
    if (fs::exists(run / "ablation.md")) {
        std::ifstream abl(run / "ablation.md");
        md << "\n" << abl.rdbuf() << "\n";
    }
    std::cout << "report written: " << (run / "report.md").string() << "\n";
}

}  // namespace sepvae::cli
