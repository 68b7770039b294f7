#include "sepvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fs = std::filesystem;

namespace sepvae {

namespace {

const char* space_name(LatentSpace s) {
    return s == LatentSpace::common ? "common" : "salient";
}

const char* metric_name(ProbeMetric m) {
    switch (m) {
        case ProbeMetric::ACC: return "ACC";
        case ProbeMetric::B_ACC: return "B-ACC";
        case ProbeMetric::AUC: return "AUC";
        case ProbeMetric::MAE: return "MAE";
    }
    return "?";
}

torch::Tensor take_rows(const torch::Tensor& t, const std::vector<int64_t>& idx) {
    return t.index_select(0, torch::tensor(idx, torch::kInt64));
}

// Feature standardization fitted on train rows; constant columns pass through.
struct Standardizer {
    torch::Tensor mean, scale;

    explicit Standardizer(const torch::Tensor& train) {
        mean = train.mean(0);
        auto sd = train.std(0, /*unbiased=*/false);
        scale = torch::where(sd > 1e-12, sd, torch::ones_like(sd));
    }
    torch::Tensor operator()(const torch::Tensor& x) const { return (x - mean) / scale; }
};

constexpr double kRidge = 1e-4;

}  // namespace

nlohmann::ordered_json ProbeReport::to_json() const {
    return nlohmann::ordered_json{
        {"space", space_name(space)},
        {"attribute", attribute},
        {"task", task == ProbeTask::classification ? "classification" : "regression"},
        {"metric", metric_name(metric)},
        {"value", value},
        {"std", std},
        {"n_runs", n_runs}};
}

nlohmann::ordered_json VarianceRatioReport::to_json() const {
    return nlohmann::ordered_json{
        {"var_salient_bg", var_salient_bg},
        {"var_salient_tg", var_salient_tg},
        {"ratio_tg_over_bg", std::isinf(ratio_tg_over_bg) ? 1e308 : ratio_tg_over_bg}};
}

ExtractedLatents extract_latents(SepVaeModel& model, const ContrastiveDataset& dataset) {
    torch::NoGradGuard no_grad;
    const int64_t n = dataset.size();
    SEPVAE_CHECK(n >= 1, "empty dataset");
    std::vector<torch::Tensor> cs, ss;
    const int64_t batch = 256;
    for (int64_t start = 0; start < n; start += batch) {
        const int64_t end = std::min(start + batch, n);
        auto x = dataset.images.slice(0, start, end);
        cs.push_back(model.encode_common(x).mean);
        // The frozen-std override only touches variances; means are mode-free.
        ss.push_back(model.salient_encoder->forward(x).mean);
    }
    ExtractedLatents out;
    out.common = torch::cat(cs).to(torch::kFloat64);
    out.salient = torch::cat(ss).to(torch::kFloat64);
    out.labels = dataset.labels.clone();
    return out;
}

namespace {

// Multinomial logistic regression with L2 penalty, full-batch LBFGS.
// Deterministic: zero init, convex objective.
torch::Tensor fit_logistic(const torch::Tensor& x, const torch::Tensor& targets,
                           int64_t n_classes) {
    const int64_t d = x.size(1);
    auto w = torch::zeros({d + 1, n_classes},
                          torch::TensorOptions().dtype(torch::kFloat64).requires_grad(true));
    auto xa = torch::cat({x, torch::ones({x.size(0), 1}, x.options())}, 1);

    torch::optim::LBFGS opt({w}, torch::optim::LBFGSOptions(1.0).max_iter(100));
    auto closure = [&]() -> torch::Tensor {
        opt.zero_grad();
        auto logits = xa.matmul(w);
        auto loss = torch::nn::functional::cross_entropy(logits, targets) +
                    kRidge * w.slice(0, 0, d).square().sum();
        loss.backward();
        return loss;
    };
    opt.step(closure);
    return w.detach();
}

}  // namespace

ProbeReport run_probe(const torch::Tensor& latents, const torch::Tensor& targets,
                      ProbeTask task, const std::vector<int64_t>& train_idx,
                      const std::vector<int64_t>& test_idx, uint64_t seed) {
    (void)seed;  // probes are deterministic; seed reserved for stochastic variants
    SEPVAE_CHECK(!train_idx.empty() && !test_idx.empty(), "empty split");
    {
        std::unordered_set<int64_t> seen(train_idx.begin(), train_idx.end());
        for (auto i : test_idx) {
            SEPVAE_CHECK(!seen.count(i), "train/test splits overlap");
        }
    }
    auto x = latents.to(torch::kFloat64);
    auto x_train = take_rows(x, train_idx);
    auto x_test = take_rows(x, test_idx);
    Standardizer std_fit(x_train);
    x_train = std_fit(x_train);
    x_test = std_fit(x_test);

    ProbeReport report;
    report.task = task;

    if (task == ProbeTask::classification) {
        auto y_train = take_rows(targets, train_idx).to(torch::kInt64);
        auto y_test = take_rows(targets, test_idx).to(torch::kInt64);
        const int64_t n_classes = std::max<int64_t>(y_train.max().item<int64_t>() + 1, 2);
        SEPVAE_CHECK(std::get<0>(torch::_unique(y_train)).numel() >= 2,
                     "degenerate probe: single-class train targets");
        auto w = fit_logistic(x_train, y_train, n_classes);
        auto xa = torch::cat({x_test, torch::ones({x_test.size(0), 1}, x_test.options())}, 1);
        auto pred = xa.matmul(w).argmax(1);
        report.metric = ProbeMetric::ACC;
        report.value = (pred == y_test).to(torch::kFloat64).mean().item<double>();
    } else {
        auto y_train = take_rows(targets, train_idx).to(torch::kFloat64);
        auto y_test = take_rows(targets, test_idx).to(torch::kFloat64);
        const int64_t d = x_train.size(1);
        auto xa = torch::cat({x_train, torch::ones({x_train.size(0), 1}, x_train.options())}, 1);
        auto reg = torch::eye(d + 1, torch::kFloat64) * kRidge;
        reg[d][d] = 0.0;  // no penalty on the bias
        auto w = torch::linalg_solve(xa.t().matmul(xa) + reg, xa.t().matmul(y_train));
        auto xt = torch::cat({x_test, torch::ones({x_test.size(0), 1}, x_test.options())}, 1);
        report.metric = ProbeMetric::MAE;
        report.value = (xt.matmul(w) - y_test).abs().mean().item<double>();
    }
    return report;
}

double auc_score(const torch::Tensor& scores, const torch::Tensor& labels) {
    auto s = scores.to(torch::kFloat64).flatten();
    auto y = labels.to(torch::kInt64).flatten();
    const int64_t n = s.size(0);
    SEPVAE_CHECK(n == y.size(0) && n >= 2, "scores/labels mismatch");
    const int64_t n_pos = y.sum().item<int64_t>();
    const int64_t n_neg = n - n_pos;
    SEPVAE_CHECK(n_pos > 0 && n_neg > 0, "AUC needs both classes");

    auto order = s.argsort();
    auto sorted = s.index_select(0, order);
    auto ranks = torch::empty({n}, torch::kFloat64);
    int64_t i = 0;
    while (i < n) {
        int64_t j = i;
        while (j + 1 < n && sorted[j + 1].item<double>() == sorted[i].item<double>()) ++j;
        const double midrank = 0.5 * (i + j) + 1.0;  // 1-based midrank for ties
        for (int64_t k = i; k <= j; ++k) {
            ranks[order[k].item<int64_t>()] = midrank;
        }
        i = j + 1;
    }
    const double pos_rank_sum = (ranks * y.to(torch::kFloat64)).sum().item<double>();
    return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

// Fresh 2-layer MLP probe, full-batch Adam; returns test scores.
torch::Tensor mlp_probe_scores(const torch::Tensor& x_train, const torch::Tensor& y_train,
                               const torch::Tensor& x_test, uint64_t seed) {
    torch::manual_seed(seed);
    BinaryMlp mlp(x_train.size(1), 32);
    torch::optim::Adam opt(mlp->parameters(), torch::optim::AdamOptions(1e-2));
    auto xf = x_train.to(torch::kFloat32);
    auto yf = y_train.to(torch::kFloat32);
    for (int iter = 0; iter < 300; ++iter) {
        opt.zero_grad();
        auto p = mlp->forward(xf);
        auto loss = -(yf * torch::log(p) + (1.0f - yf) * torch::log(1.0f - p)).mean();
        loss.backward();
        opt.step();
    }
    torch::NoGradGuard no_grad;
    return mlp->forward(x_test.to(torch::kFloat32)).to(torch::kFloat64);
}

}  // namespace

std::pair<ProbeReport, ProbeReport> bg_vs_tg_score(
    const torch::Tensor& common, const torch::Tensor& salient, const torch::Tensor& labels,
    SepVaeModel& model, BgVsTgMethod method, const std::vector<int64_t>& train_idx,
    const std::vector<int64_t>& test_idx, uint64_t seed) {
    auto y_train = take_rows(labels, train_idx);
    SEPVAE_CHECK(y_train.sum().item<int64_t>() > 0 &&
                     y_train.sum().item<int64_t>() < static_cast<int64_t>(train_idx.size()),
                 "both labels must be present in the train split");
    auto y_test = take_rows(labels, test_idx);

    ProbeReport salient_report, common_report;
    salient_report.space = LatentSpace::salient;
    common_report.space = LatentSpace::common;
    salient_report.attribute = common_report.attribute = "bg_vs_tg";
    salient_report.metric = common_report.metric = ProbeMetric::AUC;

    torch::Tensor salient_scores;
    if (method == BgVsTgMethod::sepvae) {
        torch::NoGradGuard no_grad;
        salient_scores =
            model.classify_salient(take_rows(salient, test_idx).to(torch::kFloat32))
                .to(torch::kFloat64);
    } else {
        Standardizer std_s(take_rows(salient, train_idx));
        salient_scores = mlp_probe_scores(std_s(take_rows(salient, train_idx)),
                                          y_train.to(torch::kFloat64),
                                          std_s(take_rows(salient, test_idx)), seed);
    }
    salient_report.value = auc_score(salient_scores, y_test);

    Standardizer std_c(take_rows(common, train_idx));
    auto common_scores = mlp_probe_scores(std_c(take_rows(common, train_idx)),
                                          y_train.to(torch::kFloat64),
                                          std_c(take_rows(common, test_idx)), seed + 1);
    common_report.value = auc_score(common_scores, y_test);
    return {salient_report, common_report};
}

VarianceRatioReport variance_ratio(const torch::Tensor& salient, const torch::Tensor& labels) {
    auto s = salient.to(torch::kFloat64);
    auto mask_bg = labels == 0;
    auto mask_tg = labels == 1;
    SEPVAE_CHECK(mask_bg.sum().item<int64_t>() >= 2 && mask_tg.sum().item<int64_t>() >= 2,
                 "each label group needs at least 2 samples");

    auto var_of = [&](const torch::Tensor& mask) {
        auto rows = s.index({mask});
        return rows.var(0, /*unbiased=*/true).mean().item<double>();
    };
    VarianceRatioReport report;
    report.var_salient_bg = var_of(mask_bg);
    report.var_salient_tg = var_of(mask_tg);
    report.ratio_tg_over_bg =
        report.var_salient_bg > 0.0
            ? report.var_salient_tg / report.var_salient_bg
            : std::numeric_limits<double>::infinity();
    return report;
}

namespace {

void write_image_grid(const torch::Tensor& grid_rows, const std::string& path) {
    // grid_rows: (rows, n, C, H, W) in [0,1]
    const int64_t rows = grid_rows.size(0), n = grid_rows.size(1);
    const int64_t c = grid_rows.size(2), h = grid_rows.size(3), w = grid_rows.size(4);
    const int pad = 2;
    const int total_h = static_cast<int>(rows * (h + pad) + pad);
    const int total_w = static_cast<int>(n * (w + pad) + pad);
    cv::Mat canvas(total_h, total_w, c == 1 ? CV_8UC1 : CV_8UC3, cv::Scalar::all(32));

    auto u8 = (grid_rows.clamp(0, 1) * 255.0).round().to(torch::kUInt8).contiguous();
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t i = 0; i < n; ++i) {
            cv::Mat cell;
            if (c == 1) {
                cell = cv::Mat(static_cast<int>(h), static_cast<int>(w), CV_8UC1,
                               u8[r][i][0].data_ptr<uint8_t>());
            } else {
                auto hwc = u8[r][i].permute({1, 2, 0}).contiguous();
                cell = cv::Mat(static_cast<int>(h), static_cast<int>(w), CV_8UC3,
                               hwc.data_ptr<uint8_t>())
                           .clone();
                cv::cvtColor(cell, cell, cv::COLOR_RGB2BGR);
            }
            cell.copyTo(canvas(cv::Rect(static_cast<int>(pad + i * (w + pad)),
                                        static_cast<int>(pad + r * (h + pad)),
                                        static_cast<int>(w), static_cast<int>(h))));
        }
    }
    cv::imwrite(path, canvas);
}

}  // namespace

std::pair<torch::Tensor, torch::Tensor> reconstruction_gallery(
    SepVaeModel& model, const torch::Tensor& images, const torch::Tensor& labels,
    const std::string& out_path) {
    torch::NoGradGuard no_grad;
    SEPVAE_CHECK(images.dim() == 4 && images.size(0) >= 1, "need a (B,C,H,W) batch");

    auto c_mean = model.encode_common(images).mean;
    auto s_mean = model.salient_encoder->forward(images).mean;
    auto y_col = labels.to(s_mean.dtype()).unsqueeze(-1);
    auto full = model.decode(c_mean, y_col * s_mean);
    auto common_only = model.decode(c_mean, torch::zeros_like(s_mean));

    if (!out_path.empty()) {
        auto grid = torch::stack({images, full, common_only});
        write_image_grid(grid, out_path);
    }
    return {full, common_only};
}

torch::Tensor pca_projection(const torch::Tensor& salient, const torch::Tensor& labels,
                             const torch::Tensor& subtype, const std::string& plot_path) {
    SEPVAE_CHECK(salient.size(0) >= 3, "PCA needs at least 3 samples");
    auto s = salient.to(torch::kFloat64);
    auto centered = s - s.mean(0);
    auto svd = torch::linalg_svd(centered, /*full_matrices=*/false);
    auto v = std::get<2>(svd).t();  // (D, min(n,D)) principal directions
    const int64_t available = v.size(1);
    auto coords = torch::zeros({s.size(0), 2}, torch::kFloat64);
    const int64_t take = std::min<int64_t>(2, available);
    coords.slice(1, 0, take) = centered.matmul(v.slice(1, 0, take));
    // A rank-1 space legitimately yields an all-zero second component.

    if (!plot_path.empty()) {
        const int size = 512, margin = 32;
        cv::Mat canvas(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
        auto mins = std::get<0>(coords.min(0));
        auto maxs = std::get<0>(coords.max(0));
        auto span = (maxs - mins).clamp_min(1e-12);
        static const cv::Scalar tg_palette[] = {
            {60, 76, 231}, {113, 204, 46}, {219, 152, 52}, {182, 89, 155}};
        for (int64_t i = 0; i < coords.size(0); ++i) {
            const double fx = (coords[i][0].item<double>() - mins[0].item<double>()) /
                              span[0].item<double>();
            const double fy = (coords[i][1].item<double>() - mins[1].item<double>()) /
                              span[1].item<double>();
            const cv::Point p(margin + static_cast<int>(fx * (size - 2 * margin)),
                              size - margin - static_cast<int>(fy * (size - 2 * margin)));
            cv::Scalar color(160, 160, 160);  // background samples: gray
            if (labels[i].item<int64_t>() == 1) {
                const int64_t st = subtype.defined() ? subtype[i].item<int64_t>() : 0;
                color = tg_palette[std::max<int64_t>(st, 0) % 4];
            }
            cv::circle(canvas, p, 2, color, cv::FILLED, cv::LINE_AA);
        }
        cv::imwrite(plot_path, canvas);
    }
    return coords;
}

namespace {

// Positions (within `subset`) of entries whose dataset index is in `wanted`.
std::vector<int64_t> positions_in(const std::vector<int64_t>& subset,
                                  const std::vector<int64_t>& wanted) {
    std::unordered_set<int64_t> w(wanted.begin(), wanted.end());
    std::vector<int64_t> out;
    for (int64_t pos = 0; pos < static_cast<int64_t>(subset.size()); ++pos) {
        if (w.count(subset[pos])) out.push_back(pos);
    }
    return out;
}

}  // namespace

nlohmann::ordered_json evaluate_model(SepVaeModel& model, const ContrastiveDataset& dataset,
                                      const SplitIndices& splits, uint64_t seed,
                                      const std::string& figures_dir,
                                      BgVsTgMethod bg_tg_method) {
    auto latents = extract_latents(model, dataset);
    nlohmann::ordered_json probes = nlohmann::ordered_json::array();
    nlohmann::ordered_json summary;

    // Subtype probes: target samples only.
    std::vector<int64_t> tg_rows;
    for (int64_t i = 0; i < dataset.size(); ++i) {
        if (dataset.subtype[i].item<int64_t>() >= 0) tg_rows.push_back(i);
    }
    if (!tg_rows.empty()) {
        auto tg_train = positions_in(tg_rows, splits.train);
        auto tg_test = positions_in(tg_rows, splits.test);
        if (!tg_train.empty() && !tg_test.empty()) {
            auto sub = take_rows(dataset.subtype, tg_rows);
            for (auto space : {LatentSpace::salient, LatentSpace::common}) {
                auto rows = take_rows(
                    space == LatentSpace::salient ? latents.salient : latents.common, tg_rows);
                auto r = run_probe(rows, sub, ProbeTask::classification, tg_train, tg_test,
                                   seed);
                r.space = space;
                r.attribute = "subtype";
                probes.push_back(r.to_json());
                summary[std::string(space_name(space)) + "_subtype_acc"] = r.value;
            }
        }
    }

    // Continuous attribute probes on every row where the attribute is set.
    double common_mae_sum = 0.0, salient_mae_sum = 0.0;
    int64_t attr_count = 0;
    for (size_t a = 0; a < dataset.attribute_names.size(); ++a) {
        auto col = dataset.attributes.select(1, static_cast<int64_t>(a));
        std::vector<int64_t> rows_with;
        for (int64_t i = 0; i < dataset.size(); ++i) {
            if (!std::isnan(col[i].item<double>())) rows_with.push_back(i);
        }
        auto a_train = positions_in(rows_with, splits.train);
        auto a_test = positions_in(rows_with, splits.test);
        if (a_train.size() < 4 || a_test.size() < 4) continue;
        auto targets = take_rows(col, rows_with);
        double mae_by_space[2] = {0, 0};
        for (auto space : {LatentSpace::common, LatentSpace::salient}) {
            auto rows = take_rows(
                space == LatentSpace::salient ? latents.salient : latents.common, rows_with);
            auto r = run_probe(rows, targets, ProbeTask::regression, a_train, a_test, seed);
            r.space = space;
            r.attribute = dataset.attribute_names[a];
            probes.push_back(r.to_json());
            mae_by_space[space == LatentSpace::salient ? 1 : 0] = r.value;
        }
        common_mae_sum += mae_by_space[0];
        salient_mae_sum += mae_by_space[1];
        ++attr_count;
    }
    if (attr_count > 0) {
        summary["common_attr_mae_mean"] = common_mae_sum / attr_count;
        summary["salient_attr_mae_mean"] = salient_mae_sum / attr_count;
    }

    // Background vs target classification.
    auto [s_auc, c_auc] = bg_vs_tg_score(latents.common, latents.salient, latents.labels,
                                         model, bg_tg_method, splits.train,
                                         splits.test, seed);
    probes.push_back(s_auc.to_json());
    probes.push_back(c_auc.to_json());
    summary["salient_bg_tg_auc"] = s_auc.value;
    summary["common_bg_tg_auc"] = c_auc.value;

    // Variance ratio on the test split.
    auto test_salient = take_rows(latents.salient, splits.test);
    auto test_labels = take_rows(latents.labels, splits.test);
    auto vr = variance_ratio(test_salient, test_labels);
    summary["variance_ratio_tg_over_bg"] = vr.to_json()["ratio_tg_over_bg"];

    if (!figures_dir.empty()) {
        fs::create_directories(figures_dir);
        // Gallery: a few background then target test images.
        std::vector<int64_t> cols;
        for (int pass = 0; pass < 2; ++pass) {
            int found = 0;
            for (auto i : splits.test) {
                if (dataset.labels[i].item<int64_t>() == pass && found < 4) {
                    cols.push_back(i);
                    ++found;
                }
            }
        }
        if (!cols.empty()) {
            reconstruction_gallery(model, take_rows(dataset.images, cols),
                                   take_rows(dataset.labels, cols),
                                   (fs::path(figures_dir) / "gallery.png").string());
        }
        auto test_subtype = take_rows(dataset.subtype, splits.test);
        pca_projection(test_salient, test_labels, test_subtype,
                       (fs::path(figures_dir) / "pca_salient.png").string());
    }

    return nlohmann::ordered_json{
        {"probes", probes},
        {"variance_ratio", vr.to_json()},
        {"summary", summary}};
}

LossWeights apply_ablation(LossWeights base, const std::string& row_name) {
    if (row_name == "full") return base;
    SEPVAE_CHECK(row_name.rfind("no_", 0) == 0, "unknown ablation row: " + row_name);
    std::stringstream ss(row_name.substr(3));
    std::string token;
    while (std::getline(ss, token, '_')) {
        if (token == "mi") {
            base.ablate_mi = true;
        } else if (token == "clsf") {
            base.ablate_clsf = true;
        } else if (token == "sal") {
            base.ablate_sal = true;
        } else {
            throw ContractViolation("unknown ablation token: " + token);
        }
    }
    return base;
}

std::vector<std::string> standard_ablation_grid() {
    return {"full", "no_mi", "no_clsf", "no_sal", "no_mi_sal", "no_mi_clsf",
            "no_mi_sal_clsf"};
}

std::pair<double, double> AblationRow::aggregate(const std::string& key) const {
    std::vector<double> values;
    for (const auto& cell : cells) {
        if (!cell.failed && cell.metrics.contains("summary") &&
            cell.metrics["summary"].contains(key)) {
            values.push_back(cell.metrics["summary"][key].get<double>());
        }
    }
    if (values.empty()) {
        return {std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN()};
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    // Std over seeds, not over batches.
    const double sd = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
    return {mean, sd};
}

std::vector<AblationRow> ablation_suite(const TrainConfig& base_config,
                                        const ContrastiveDataset& dataset,
                                        const SplitIndices& splits,
                                        const std::vector<std::string>& grid,
                                        const std::vector<uint64_t>& seeds) {
    base_config.validate();
    SEPVAE_CHECK(!grid.empty() && !seeds.empty(), "grid and seeds must be non-empty");

    auto train_set = dataset.select(splits.train);
    std::vector<AblationRow> rows;
    for (const auto& name : grid) {
        AblationRow row;
        row.name = name;
        for (uint64_t seed : seeds) {
            AblationCellResult cell;
            cell.seed = seed;
            try {
                TrainConfig cfg = base_config;
                cfg.weights = apply_ablation(base_config.weights, name);
                cfg.seed = seed;
                auto fitted = fit(cfg, train_set);
                // f_xi is untrained when the classification term is ablated;
                // those rows get the MLP probe instead.
                const auto method = cfg.weights.ablate_clsf ? BgVsTgMethod::baseline
                                                            : BgVsTgMethod::sepvae;
                cell.metrics = evaluate_model(fitted.model, dataset, splits, seed, "", method);
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            row.cells.push_back(std::move(cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

const std::vector<std::pair<const char*, const char*>> kAblationColumns = {
    {"salient_subtype_acc", "salient subtype ACC"},
    {"common_subtype_acc", "common subtype ACC"},
    {"salient_bg_tg_auc", "salient BG-vs-TG AUC"},
    {"common_bg_tg_auc", "common BG-vs-TG AUC"}};

}  // namespace

nlohmann::ordered_json ablation_table_json(const std::vector<AblationRow>& rows) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json j{{"name", row.name}};
        int64_t failed = 0;
        for (const auto& cell : row.cells) failed += cell.failed ? 1 : 0;
        j["n_seeds"] = row.cells.size();
        j["n_failed"] = failed;
        for (const auto& [key, _] : kAblationColumns) {
            auto [mean, sd] = row.aggregate(key);
            j[key] = nlohmann::ordered_json{{"mean", mean}, {"std", sd}};
        }
        out.push_back(std::move(j));
    }
    return out;
}

std::string ablation_table_markdown(const std::vector<AblationRow>& rows) {
    std::stringstream md;
    md << "| configuration |";
    for (const auto& [_, title] : kAblationColumns) md << " " << title << " |";
    md << "\n|---|";
    for (size_t i = 0; i < kAblationColumns.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& row : rows) {
        md << "| " << row.name << " |";
        for (const auto& [key, _] : kAblationColumns) {
            auto [mean, sd] = row.aggregate(key);
            char buf[64];
            if (std::isnan(mean)) {
                std::snprintf(buf, sizeof(buf), " n/a |");
            } else {
                std::snprintf(buf, sizeof(buf), " %.4f ± %.4f |", mean, sd);
            }
            md << buf;
        }
        md << "\n";
    }
    return md.str();
}

}  // namespace sepvae
