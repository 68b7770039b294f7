#include <cmath>
#include <filesystem>

#include "sepvae/eval.hpp"
#include "test_utils.hpp"

// doctest last so its short macro names win over torch logging macros.
#include <doctest.h>

using namespace sepvae;
namespace fs = std::filesystem;

namespace {

std::vector<int64_t> iota_vec(int64_t lo, int64_t hi) {
    std::vector<int64_t> v(hi - lo);
    std::iota(v.begin(), v.end(), lo);
    return v;
}

}  // namespace

TEST_CASE("auc_score") {
    SUBCASE("perfect separation") {
        auto scores = torch::tensor({0.1, 0.2, 0.8, 0.9});
        auto labels = torch::tensor({0, 0, 1, 1}, torch::kInt64);
        CHECK(auc_score(scores, labels) == doctest::Approx(1.0));
        CHECK(auc_score(-scores, labels) == doctest::Approx(0.0));
    }
    SUBCASE("all-tied scores give chance level") {
        auto scores = torch::full({6}, 0.5);
        auto labels = torch::tensor({0, 1, 0, 1, 0, 1}, torch::kInt64);
        CHECK(auc_score(scores, labels) == doctest::Approx(0.5));
    }
    SUBCASE("hand-computed mixed case") {
        // Pairs: (0.3,0) (0.4,1) (0.5,0) (0.6,1): 3 of 4 pos/neg orderings correct.
        auto scores = torch::tensor({0.3, 0.4, 0.5, 0.6});
        auto labels = torch::tensor({0, 1, 0, 1}, torch::kInt64);
        CHECK(auc_score(scores, labels) == doctest::Approx(0.75));
    }
    SUBCASE("single-class labels are rejected") {
        CHECK_THROWS_AS(auc_score(torch::rand({4}), torch::zeros({4}, torch::kInt64)),
                        ContractViolation);
    }
}

TEST_CASE("classification probe recovers a linear rule") {
    torch::manual_seed(30);
    const int64_t n = 300;
    auto x = torch::randn({n, 5}, torch::kFloat64);
    auto y = (x.select(1, 2) > 0).to(torch::kInt64);

    auto report = run_probe(x, y, ProbeTask::classification, iota_vec(0, 200),
                            iota_vec(200, n), 0);
    CHECK(report.metric == ProbeMetric::ACC);
    CHECK(report.value > 0.95);

    // Deterministic.
    auto again = run_probe(x, y, ProbeTask::classification, iota_vec(0, 200),
                           iota_vec(200, n), 0);
    CHECK(report.value == doctest::Approx(again.value));

    // Multi-class works too.
    auto y3 = torch::clamp((x.select(1, 0) * 2).to(torch::kInt64) + 1, 0, 2);
    auto multi = run_probe(x, y3, ProbeTask::classification, iota_vec(0, 200),
                           iota_vec(200, n), 0);
    CHECK(multi.value > 0.6);
}

TEST_CASE("regression probe recovers a linear target") {
    torch::manual_seed(31);
    const int64_t n = 300;
    auto x = torch::randn({n, 4}, torch::kFloat64);
    auto target = 2.0 * x.select(1, 0) - x.select(1, 3) + 0.5;

    auto report = run_probe(x, target, ProbeTask::regression, iota_vec(0, 200),
                            iota_vec(200, n), 0);
    CHECK(report.metric == ProbeMetric::MAE);
    CHECK(report.value < 0.05);

    // An unrelated target stays near the scale of its own spread.
    auto noise_target = torch::randn({n}, torch::kFloat64);
    auto noise_report = run_probe(x, noise_target, ProbeTask::regression, iota_vec(0, 200),
                                  iota_vec(200, n), 0);
    CHECK(noise_report.value > 0.5);
}

TEST_CASE("probe input validation") {
    auto x = torch::randn({10, 2}, torch::kFloat64);
    auto y = torch::cat({torch::zeros({5}, torch::kInt64), torch::ones({5}, torch::kInt64)});
    // Overlapping train and test rows.
    CHECK_THROWS_AS(run_probe(x, y, ProbeTask::classification, iota_vec(0, 6),
                              iota_vec(5, 10), 0),
                    ContractViolation);
    // Single-class training set.
    CHECK_THROWS_AS(run_probe(x, y, ProbeTask::classification, iota_vec(0, 4),
                              iota_vec(5, 10), 0),
                    ContractViolation);
}

TEST_CASE("variance ratio") {
    SUBCASE("hand-built groups") {
        // bg rows have tiny spread, tg rows a large one.
        auto salient = torch::tensor({{0.0}, {0.1}, {-0.1}, {3.0}, {-3.0}, {0.0}},
                                     torch::kFloat64);
        auto labels = torch::tensor({0, 0, 0, 1, 1, 1}, torch::kInt64);
        auto r = variance_ratio(salient, labels);
        CHECK(r.var_salient_bg == doctest::Approx(0.01));
        CHECK(r.var_salient_tg == doctest::Approx(9.0));
        CHECK(r.ratio_tg_over_bg == doctest::Approx(900.0));
    }
    SUBCASE("degenerate background hits the sentinel") {
        auto salient = torch::tensor({{1.0}, {1.0}, {0.0}, {2.0}}, torch::kFloat64);
        auto labels = torch::tensor({0, 0, 1, 1}, torch::kInt64);
        auto r = variance_ratio(salient, labels);
        CHECK(std::isinf(r.ratio_tg_over_bg));
        // JSON stays finite for serialization.
        auto j = r.to_json();
        CHECK(j["ratio_tg_over_bg"].get<double>() == doctest::Approx(1e308));
    }
}

TEST_CASE("apply_ablation flag mapping") {
    LossWeights base;
    CHECK(!apply_ablation(base, "full").ablate_mi);
    CHECK(apply_ablation(base, "no_mi").ablate_mi);
    CHECK(apply_ablation(base, "no_clsf").ablate_clsf);
    CHECK(apply_ablation(base, "no_sal").ablate_sal);
    auto combo = apply_ablation(base, "no_mi_sal_clsf");
    CHECK(combo.ablate_mi);
    CHECK(combo.ablate_sal);
    CHECK(combo.ablate_clsf);
    auto two = apply_ablation(base, "no_mi_clsf");
    CHECK(two.ablate_mi);
    CHECK(two.ablate_clsf);
    CHECK(!two.ablate_sal);
    CHECK_THROWS_AS(apply_ablation(base, "no_everything"), ContractViolation);

    auto grid = standard_ablation_grid();
    CHECK(grid.front() == "full");
    for (const auto& name : grid) {
        CHECK_NOTHROW(apply_ablation(base, name));
    }
}

TEST_CASE("ablation row aggregation") {
    AblationRow row;
    row.name = "full";
    for (double v : {0.8, 0.9}) {
        AblationCellResult cell;
        cell.metrics = {{"summary", {{"salient_subtype_acc", v}}}};
        row.cells.push_back(cell);
    }
    AblationCellResult failed;
    failed.failed = true;
    failed.error = "boom";
    row.cells.push_back(failed);

    auto [mean, std] = row.aggregate("salient_subtype_acc");
    CHECK(mean == doctest::Approx(0.85));
    CHECK(std == doctest::Approx(std::sqrt(0.005)).epsilon(1e-6));
}

TEST_CASE("end-to-end evaluation of a briefly trained model") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 5;
    cfg.checkpoint_every = 100;
    cfg.model.image_shape = {1, 16, 16};
    cfg.model.d_common = 4;
    cfg.model.d_salient = 3;
    cfg.model.encoder_channels = {4, 8};
    cfg.model.hidden_width = 16;
    cfg.model.classifier_hidden = 8;
    cfg.model.discriminator_hidden = 8;

    DataGenConfig d;
    d.n_background = 64;
    d.n_target = 64;
    d.image_height = 16;
    d.image_width = 16;
    d.seed = 6;
    auto ds = generate_synthetic(d).first;
    auto splits = split(ds, 0.6, 0.2, 0.2, 7, true);

    auto result = fit(cfg, ds.select(splits.train));

    auto latents = extract_latents(result.model, ds);
    CHECK(latents.common.sizes() == torch::IntArrayRef({128, 4}));
    CHECK(latents.salient.sizes() == torch::IntArrayRef({128, 3}));
    CHECK(latents.common.dtype() == torch::kFloat64);

    const auto fig_dir = fs::temp_directory_path() / "sepvae_eval_test";
    fs::remove_all(fig_dir);
    auto metrics = evaluate_model(result.model, ds, splits, 11, fig_dir.string());

    for (const char* key :
         {"salient_subtype_acc", "common_subtype_acc", "common_attr_mae_mean",
          "salient_attr_mae_mean", "salient_bg_tg_auc", "common_bg_tg_auc",
          "variance_ratio_tg_over_bg"}) {
        REQUIRE(metrics["summary"].contains(key));
        CHECK(std::isfinite(metrics["summary"][key].get<double>()));
    }
    CHECK(metrics["summary"]["salient_subtype_acc"].get<double>() >= 0.0);
    CHECK(metrics["summary"]["salient_subtype_acc"].get<double>() <= 1.0);

    CHECK(fs::exists(fig_dir / "gallery.png"));
    CHECK(fs::exists(fig_dir / "pca_salient.png"));
    fs::remove_all(fig_dir);

    // The whole pipeline is deterministic end to end.
    auto metrics2 = evaluate_model(result.model, ds, splits, 11);
    CHECK(metrics["summary"] == metrics2["summary"]);
}

TEST_CASE("ablation table rendering") {
    AblationRow row;
    row.name = "no_mi";
    AblationCellResult cell;
    cell.seed = 3;
    cell.metrics = {{"summary",
                     {{"salient_subtype_acc", 0.9},
                      {"common_subtype_acc", 0.5},
                      {"salient_bg_tg_auc", 0.95},
                      {"common_bg_tg_auc", 0.6}}}};
    row.cells.push_back(cell);

    auto j = ablation_table_json({row});
    CHECK(j.is_array());
    CHECK(j[0]["name"] == "no_mi");

    auto md = ablation_table_markdown({row});
    CHECK(md.find("no_mi") != std::string::npos);
    CHECK(md.find('|') != std::string::npos);
}
