#ifndef SEPVAE_TRAIN_HPP
#define SEPVAE_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>
#include <nlohmann/json.hpp>

#include "sepvae/data.hpp"
#include "sepvae/losses.hpp"
#include "sepvae/mi.hpp"
#include "sepvae/model.hpp"

namespace sepvae {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    int64_t epochs = 30;
    int64_t batch_size = 128;
    double lr_main = 1e-3;
    double lr_discriminator = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    uint64_t seed = 0;
    int64_t checkpoint_every = 10;
    bool reinstantiate_optimizer_each_epoch = false;
    int64_t disc_steps_per_main = 1;
    LossWeights weights;
    ModelConfig model;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct HistoryRow {
    int64_t epoch = 0;
    int64_t step = 0;
    LossBreakdown losses;
    double disc_bce = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingHistory {
    std::vector<HistoryRow> rows;

    /// Columns: epoch,step,rec,kl_c,kl_s,clsf,mi,total,disc_bce.
    void write_csv(const std::string& path) const;
};

/// Raised when a loss term goes non-finite; names the offending term.
class NonFiniteLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One two-phase update on a batch: discriminator first (lambda only),
/// then the main networks against the full objective with the MI penalty
/// evaluated under a frozen discriminator.
HistoryRow train_step(const torch::Tensor& x, const torch::Tensor& y, SepVaeModel& model,
                      torch::optim::Optimizer& main_optimizer,
                      torch::optim::Optimizer& disc_optimizer, const TrainConfig& config,
                      uint64_t shuffle_seed);

struct FitResult {
    SepVaeModel model;
    TrainingHistory history;
};

/// Runs the full training loop. When `run_dir` is set, writes train_log.csv
/// and periodic checkpoints under it.
FitResult fit(const TrainConfig& config, const ContrastiveDataset& dataset,
              const std::optional<std::string>& run_dir = std::nullopt);

}  // namespace sepvae

#endif
