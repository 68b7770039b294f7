#ifndef SEPVAE_EVAL_HPP
#define SEPVAE_EVAL_HPP

#include <string>
#include <vector>

#include <torch/torch.h>
#include <nlohmann/json.hpp>

#include "sepvae/data.hpp"
#include "sepvae/train.hpp"

namespace sepvae {

enum class LatentSpace { common, salient };
enum class ProbeTask { classification, regression };
enum class ProbeMetric { ACC, B_ACC, AUC, MAE };

struct ProbeReport {
    LatentSpace space = LatentSpace::common;
    std::string attribute;
    ProbeTask task = ProbeTask::classification;
    ProbeMetric metric = ProbeMetric::ACC;
    double value = 0.0;
    double std = 0.0;
    int64_t n_runs = 1;

    nlohmann::ordered_json to_json() const;
};

struct VarianceRatioReport {
    double var_salient_bg = 0.0;
    double var_salient_tg = 0.0;
    double ratio_tg_over_bg = 0.0;  // +inf sentinel when bg variance is 0

    nlohmann::ordered_json to_json() const;
};

struct ExtractedLatents {
    torch::Tensor common;   // (n, D_c) float64 posterior means
    torch::Tensor salient;  // (n, D_s) float64 posterior means
    torch::Tensor labels;   // (n) int64
};

/// Posterior means for every sample; deterministic (no sampling).
ExtractedLatents extract_latents(SepVaeModel& model, const ContrastiveDataset& dataset);

/// Fits a linear probe (multinomial logistic for classification,
/// closed-form ridge for regression, both with ridge 1e-4) on the train
/// rows and scores the test rows.
ProbeReport run_probe(const torch::Tensor& latents, const torch::Tensor& targets,
                      ProbeTask task, const std::vector<int64_t>& train_idx,
                      const std::vector<int64_t>& test_idx, uint64_t seed);

/// Area under the ROC curve from scores and binary labels (midrank ties).
double auc_score(const torch::Tensor& scores, const torch::Tensor& labels);

enum class BgVsTgMethod { sepvae, baseline };

/// Background-vs-target AUC per space. With method sepvae the salient score
/// comes straight from the trained classifier f_xi; otherwise a fresh
/// 2-layer MLP is fit on the salient train rows. The common score always
/// uses a fresh 2-layer MLP.
std::pair<ProbeReport, ProbeReport> bg_vs_tg_score(
    const torch::Tensor& common, const torch::Tensor& salient, const torch::Tensor& labels,
    SepVaeModel& model, BgVsTgMethod method, const std::vector<int64_t>& train_idx,
    const std::vector<int64_t>& test_idx, uint64_t seed);

/// Per-dimension salient variance within each label group, averaged over
/// dimensions; ratio is target over background.
VarianceRatioReport variance_ratio(const torch::Tensor& salient, const torch::Tensor& labels);

/// Writes a (3 rows x n cols) grid: inputs, full reconstructions and
/// common-only reconstructions (salient fixed to s'). Returns the two
/// reconstruction batches.
std::pair<torch::Tensor, torch::Tensor> reconstruction_gallery(
    SepVaeModel& model, const torch::Tensor& images, const torch::Tensor& labels,
    const std::string& out_path);

/// First two principal components of the salient codes; scatter written to
/// `plot_path` when non-empty, colored by label and subtype.
torch::Tensor pca_projection(const torch::Tensor& salient, const torch::Tensor& labels,
                             const torch::Tensor& subtype, const std::string& plot_path);

/// Full evaluation of one trained model: subtype probes per space,
/// per-attribute regression probes, BG-vs-TG AUC, variance ratio. Figures
/// are written under `figures_dir` when non-empty.
nlohmann::ordered_json evaluate_model(SepVaeModel& model, const ContrastiveDataset& dataset,
                                      const SplitIndices& splits, uint64_t seed,
                                      const std::string& figures_dir = "",
                                      BgVsTgMethod bg_tg_method = BgVsTgMethod::sepvae);

/// Table-2-style grid. Returns the flag set for a row name such as
/// "no_mi_sal_clsf"; "full" leaves the weights untouched.
LossWeights apply_ablation(LossWeights base, const std::string& row_name);
std::vector<std::string> standard_ablation_grid();

struct AblationCellResult {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    nlohmann::ordered_json metrics;
};

struct AblationRow {
    std::string name;
    std::vector<AblationCellResult> cells;

    /// mean/std over successful cells of a dotted metric key.
    std::pair<double, double> aggregate(const std::string& key) const;
};

/// Trains one model per (row, seed) and evaluates each; per-cell failures
/// are recorded and the grid continues.
std::vector<AblationRow> ablation_suite(const TrainConfig& base_config,
                                        const ContrastiveDataset& dataset,
                                        const SplitIndices& splits,
                                        const std::vector<std::string>& grid,
                                        const std::vector<uint64_t>& seeds);

nlohmann::ordered_json ablation_table_json(const std::vector<AblationRow>& rows);
std::string ablation_table_markdown(const std::vector<AblationRow>& rows);

}  // namespace sepvae

#endif
