#include "sepvae/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>

namespace fs = std::filesystem;

namespace sepvae {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(
    OptimizerKind kind, std::vector<torch::Tensor> params, double lr) {
    if (kind == OptimizerKind::sgd) {
        return std::make_unique<torch::optim::SGD>(std::move(params),
                                                   torch::optim::SGDOptions(lr));
    }
    return std::make_unique<torch::optim::Adam>(std::move(params),
                                                torch::optim::AdamOptions(lr));
}

void check_finite(const LossBreakdown& b) {
    struct { const char* name; double value; } terms[] = {
        {"reconstruction", b.reconstruction}, {"kl_common", b.kl_common},
        {"kl_salient", b.kl_salient},         {"classification", b.classification},
        {"mutual_information", b.mutual_information}, {"total", b.total}};
    for (const auto& t : terms) {
        if (!std::isfinite(t.value)) {
            throw NonFiniteLossError(std::string("non-finite loss term: ") + t.name);
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    SEPVAE_CHECK(epochs >= 0, "epochs must be >= 0");
    SEPVAE_CHECK(batch_size >= 1, "batch_size must be >= 1");
    SEPVAE_CHECK(!weights.ablate_mi ? batch_size >= 2 : true,
                 "batch_size must be >= 2 when the MI term is enabled");
    SEPVAE_CHECK(lr_main > 0 && lr_discriminator > 0, "learning rates must be > 0");
    SEPVAE_CHECK(checkpoint_every >= 1, "checkpoint_every must be >= 1");
    SEPVAE_CHECK(disc_steps_per_main >= 1, "disc_steps_per_main must be >= 1");
    weights.validate();
    model.validate();
}

nlohmann::ordered_json TrainConfig::to_json() const {
    return nlohmann::ordered_json{
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"lr_main", lr_main},
        {"lr_discriminator", lr_discriminator},
        {"optimizer", optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"seed", seed},
        {"checkpoint_every", checkpoint_every},
        {"reinstantiate_optimizer_each_epoch", reinstantiate_optimizer_each_epoch},
        {"disc_steps_per_main", disc_steps_per_main},
        {"weights", weights.to_json()},
        {"model", model.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr_main = j.value("lr_main", cfg.lr_main);
    cfg.lr_discriminator = j.value("lr_discriminator", cfg.lr_discriminator);
    const std::string opt = j.value("optimizer", std::string("adam"));
    SEPVAE_CHECK(opt == "adam" || opt == "sgd", "optimizer must be adam or sgd");
    cfg.optimizer = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.reinstantiate_optimizer_each_epoch =
        j.value("reinstantiate_optimizer_each_epoch", cfg.reinstantiate_optimizer_each_epoch);
    cfg.disc_steps_per_main = j.value("disc_steps_per_main", cfg.disc_steps_per_main);
    if (j.contains("weights")) {
        cfg.weights = LossWeights::from_json(j.at("weights"));
    }
    if (j.contains("model")) {
        cfg.model = ModelConfig::from_json(j.at("model"));
    }
    cfg.validate();
    return cfg;
}

void TrainingHistory::write_csv(const std::string& path) const {
    std::ofstream out(path);
    out << "epoch,step,rec,kl_c,kl_s,clsf,mi,total,disc_bce\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%lld,%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      static_cast<long long>(r.epoch), static_cast<long long>(r.step),
                      r.losses.reconstruction, r.losses.kl_common, r.losses.kl_salient,
                      r.losses.classification, r.losses.mutual_information, r.losses.total,
                      r.disc_bce);
        out << buf;
    }
}

HistoryRow train_step(const torch::Tensor& x, const torch::Tensor& y, SepVaeModel& model,
                      torch::optim::Optimizer& main_optimizer,
                      torch::optim::Optimizer& disc_optimizer, const TrainConfig& config,
                      uint64_t shuffle_seed) {
    const auto& w = config.weights;
    const bool mi_enabled = !w.ablate_mi;
    SEPVAE_CHECK(!mi_enabled || x.size(0) >= 2,
                 "MI-enabled steps need at least 2 samples");

    HistoryRow row;

    // Phase 1/2: discriminator update on detached codes (lambda only).
    if (mi_enabled) {
        for (int64_t k = 0; k < config.disc_steps_per_main; ++k) {
            JointBatch joint;
            {
                torch::NoGradGuard no_grad;
                auto code = model.forward(x, y, w.use_frozen_bg_std, w.sigma_q_bg);
                joint.common = code.common_sample;
                joint.salient = code.salient_sample;
            }
            auto shuffled = shuffle_salient(joint, mix(shuffle_seed, static_cast<uint64_t>(k)));
            row.disc_bce = discriminator_step(joint, shuffled, model, disc_optimizer);
        }
    }

    // Phase 3: main update against the full objective, discriminator frozen.
    auto code = model.forward(x, y, w.use_frozen_bg_std, w.sigma_q_bg);
    // Diverged encoders must surface as a training failure, not as a
    // precondition violation inside the KL terms.
    for (const auto& t : {code.common_posterior.mean, code.common_posterior.log_variance,
                          code.salient_posterior.mean, code.salient_posterior.log_variance}) {
        if (!torch::isfinite(t).all().item<bool>()) {
            throw NonFiniteLossError("non-finite encoder output");
        }
    }
    torch::Tensor mi_value;
    if (mi_enabled) {
        JointBatch joint{code.common_sample, code.salient_sample, BatchProvenance::joint};
        mi_value = mi_penalty(joint, model);
    }
    torch::Tensor total;
    row.losses = total_loss(x, y, code, w, model, mi_value, &total);
    check_finite(row.losses);

    main_optimizer.zero_grad();
    total.backward();
    main_optimizer.step();
    return row;
}

FitResult fit(const TrainConfig& config, const ContrastiveDataset& dataset,
              const std::optional<std::string>& run_dir) {
    config.validate();
    SEPVAE_CHECK(dataset.size() >= 1, "empty dataset");
    if (!config.weights.ablate_clsf || !config.weights.ablate_sal) {
        // Label-dependent terms need both labels present somewhere.
        const auto n_tg = dataset.labels.sum().item<int64_t>();
        SEPVAE_CHECK(n_tg > 0 && n_tg < dataset.size(),
                     "label-dependent terms need both background and target samples");
    }

    torch::manual_seed(config.seed);
    FitResult result{SepVaeModel(config.model), {}};
    auto& model = result.model;

    auto main_opt = make_optimizer(config.optimizer, model.main_parameters(), config.lr_main);
    auto disc_opt = make_optimizer(config.optimizer, model.discriminator_parameters(),
                                   config.lr_discriminator);

    std::string checkpoint_dir;
    if (run_dir) {
        checkpoint_dir = (fs::path(*run_dir) / "checkpoints").string();
        fs::create_directories(checkpoint_dir);
    }
    auto checkpoint = [&](int64_t epoch, const char* name) {
        if (!run_dir) return;
        char file[64];
        std::snprintf(file, sizeof(file), "%s.pt", name);
        save_checkpoint(model, (fs::path(checkpoint_dir) / file).string(), epoch, config.seed);
    };
    checkpoint(0, "initial");

    std::vector<int64_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    const bool mi_enabled = !config.weights.ablate_mi;
    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.reinstantiate_optimizer_each_epoch && epoch > 0) {
            main_opt = make_optimizer(config.optimizer, model.main_parameters(),
                                      config.lr_main);
            disc_opt = make_optimizer(config.optimizer, model.discriminator_parameters(),
                                      config.lr_discriminator);
        }

        std::mt19937_64 order_rng(mix(config.seed, static_cast<uint64_t>(epoch) + 1));
        std::shuffle(order.begin(), order.end(), order_rng);

        int64_t step = 0;
        for (int64_t start = 0; start < dataset.size(); start += config.batch_size) {
            const int64_t end = std::min(start + config.batch_size, dataset.size());
            if (mi_enabled && end - start < 2) {
                break;  // a trailing singleton cannot be shuffled
            }
            auto idx = torch::tensor(
                std::vector<int64_t>(order.begin() + start, order.begin() + end),
                torch::kInt64);
            auto x = dataset.images.index_select(0, idx);
            auto y = dataset.labels.index_select(0, idx);

            const uint64_t shuffle_seed =
                mix(mix(config.seed, static_cast<uint64_t>(epoch) + 1),
                    static_cast<uint64_t>(step) + 1);
            auto row = train_step(x, y, model, *main_opt, *disc_opt, config, shuffle_seed);
            row.epoch = epoch;
            row.step = step;
            result.history.rows.push_back(row);
            ++step;
        }

        if ((epoch + 1) % config.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04lld",
                          static_cast<long long>(epoch + 1));
            checkpoint(epoch + 1, name);
        }
    }

    checkpoint(config.epochs, "final");
    if (run_dir) {
        result.history.write_csv((fs::path(*run_dir) / "train_log.csv").string());
    }
    return result;
}

}  // namespace sepvae
