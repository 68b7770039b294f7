#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "sepvae/common.hpp"
#include "sepvae/train.hpp"

namespace {

// Exit codes: 0 ok, 2 config/validation error, 3 runtime abort, 4 I/O error.
constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;
constexpr int kExitIo = 4;

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) {
            seeds.push_back(std::stoull(token));
        }
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SepVAE: contrastive-analysis VAE training and evaluation"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, run_dir;
    std::vector<std::string> overrides;
    std::string ablate_flags, seed_csv = "0,1,2";
    int64_t seed = -1, epochs = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--override", overrides,
                        "dotted-key config override, e.g. train.weights.gamma=0.5");
        cmd->add_option("--seed", seed, "override train/data seed");
        cmd->add_option("--epochs", epochs, "override training epochs");
        cmd->add_option("--ablate", ablate_flags,
                        "comma list of terms to disable: mi,clsf,sal");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "config file")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    add_common(gen);

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "run directory")->required();
    add_common(train);

    auto* eval = app.add_subcommand("eval", "evaluate a trained run");
    eval->add_option("--run", run_dir, "run directory")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();

    auto* ablate = app.add_subcommand("ablate", "run the ablation grid");
    ablate->add_option("--config", config_path, "config file")->required();
    ablate->add_option("--data", data_dir, "dataset directory")->required();
    ablate->add_option("--out", out_dir, "output directory")->required();
    ablate->add_option("--seeds", seed_csv, "comma list of training seeds");
    add_common(ablate);

    auto* report = app.add_subcommand("report", "assemble a markdown report");
    report->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        // Flag-level overrides become config overrides so the snapshot
        // always reflects what actually ran.
        if (seed >= 0) {
            overrides.push_back("train.seed=" + std::to_string(seed));
            overrides.push_back("data.seed=" + std::to_string(seed));
        }
        if (epochs >= 0) {
            overrides.push_back("train.epochs=" + std::to_string(epochs));
        }
        if (!ablate_flags.empty()) {
            std::stringstream ss(ablate_flags);
            std::string term;
            while (std::getline(ss, term, ',')) {
                SEPVAE_CHECK(term == "mi" || term == "clsf" || term == "sal",
                             "unknown --ablate term: " + term);
                overrides.push_back("train.weights.ablate_" + term + "=true");
            }
        }

        if (gen->parsed()) {
            sepvae::cli::cmd_gen_data(sepvae::cli::load_config(config_path, overrides),
                                      out_dir);
        } else if (train->parsed()) {
            sepvae::cli::cmd_train(sepvae::cli::load_config(config_path, overrides),
                                   data_dir, out_dir);
        } else if (eval->parsed()) {
            sepvae::cli::cmd_eval(run_dir, data_dir);
        } else if (ablate->parsed()) {
            sepvae::cli::cmd_ablate(sepvae::cli::load_config(config_path, overrides),
                                    data_dir, out_dir, parse_seed_list(seed_csv));
        } else if (report->parsed()) {
            sepvae::cli::cmd_report(run_dir);
        }
    } catch (const sepvae::ContractViolation& e) {
        std::cerr << "config/validation error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sepvae::NonFiniteLossError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitAbort;
    } catch (const sepvae::cli::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}
