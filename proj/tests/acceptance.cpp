// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 5-7 share the synthetic end-to-end training runs.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "sepvae/data.hpp"
#include "sepvae/eval.hpp"
#include "sepvae/mi.hpp"
#include "sepvae/train.hpp"
#include "test_utils.hpp"

using namespace sepvae;
namespace fs = std::filesystem;

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

void report(int id, const char* name, const Outcome& o) {
    std::printf("%s  [%d] %-22s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome check_kl_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> log_var_dist(-2.0, 1.0);
    std::uniform_real_distribution<double> prior_var_dist(0.2, 1.5);

    const std::vector<int64_t> dims = {1, 4, 16};
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int64_t d = dims[rep % dims.size()];
        std::vector<double> mean(d), log_var(d), center(d);
        for (int64_t i = 0; i < d; ++i) {
            mean[i] = mean_dist(rng);
            log_var[i] = log_var_dist(rng);
            center[i] = mean_dist(rng);
        }
        DiagGaussian g(torch::tensor(mean, torch::kFloat64),
                       torch::tensor(log_var, torch::kFloat64));
        const auto center_t = torch::tensor(center, torch::kFloat64);
        const double prior_var = prior_var_dist(rng);

        // One set of 10^6 draws per Gaussian, scored under both priors.
        const auto est = kl_monte_carlo_oracle(
            g,
            {{torch::zeros({d}, torch::kFloat64), 1.0}, {center_t, prior_var}},
            1000000, 100 + static_cast<uint64_t>(rep));
        const double exact[2] = {kl_to_standard_normal(g).item<double>(),
                                 kl_to_isotropic(g, center_t, prior_var).item<double>()};
        for (int j = 0; j < 2; ++j) {
            const double tol = std::max(1e-2 * std::abs(exact[j]), 1e-3);
            worst = std::max(worst, std::abs(est[j] - exact[j]) / tol);
            if (std::abs(est[j] - exact[j]) > tol) {
                return {false, fmt("exact=%.6f est=%.6f at rep=%d", exact[j], est[j], rep)};
            }
        }
    }
    const double secs = elapsed_s(t0);
    return {secs < 60.0,
            fmt("100 gaussians, worst err/tol=%.3f, %.1f s (limit 60)", worst, secs)};
}

// ---------------------------------------------------------------- criterion 2

Outcome check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig cfg;
    cfg.image_shape = {1, 8, 8};
    cfg.d_common = 2;
    cfg.d_salient = 2;
    cfg.encoder_channels = {2};
    cfg.hidden_width = 3;
    cfg.classifier_hidden = 3;
    cfg.discriminator_hidden = 3;

    torch::manual_seed(7);
    SepVaeModel model(cfg);
    model.to(torch::kFloat64);

    int64_t n_params = 0;
    for (const auto& p : model.main_parameters()) n_params += p.numel();
    if (n_params > 1000) {
        return {false, fmt("miniature network has %lld parameters (> 1000)",
                           static_cast<long long>(n_params))};
    }

    auto x = torch::rand({3, 1, 8, 8}, torch::kFloat64);
    auto y = torch::tensor({0, 1, 1}, torch::kInt64);
    auto eps_c = torch::randn({3, 2}, torch::kFloat64);
    auto eps_s = torch::randn({3, 2}, torch::kFloat64);
    LossWeights w;

    auto encode = [&]() {
        LatentCode code;
        code.common_posterior = model.encode_common(x);
        code.salient_posterior = model.encode_salient(x, y, w.use_frozen_bg_std, w.sigma_q_bg);
        code.common_sample = sample_reparameterized(code.common_posterior, eps_c);
        code.salient_sample = sample_reparameterized(code.salient_posterior, eps_s);
        return code;
    };

    const std::vector<std::pair<const char*, std::function<torch::Tensor()>>> terms = {
        {"reconstruction",
         [&] {
             auto code = encode();
             return conditional_reconstruction_loss(x, code.common_sample,
                                                    code.salient_sample, y, model);
         }},
        {"kl_common", [&] { return common_prior_loss(encode().common_posterior); }},
        {"kl_salient",
         [&] { return salient_prior_loss(encode().salient_posterior, y, w); }},
        {"classification",
         [&] { return salient_classification_loss(encode().salient_sample, y, model); }},
        {"total",
         [&] {
             torch::Tensor total;
             total_loss(x, y, encode(), w, model, torch::Tensor(), &total);
             return total;
         }}};

    auto params = model.main_parameters();
    double worst = 0.0;
    for (const auto& [name, term] : terms) {
        auto analytic = sepvae::testing::analytic_gradient(term(), params);
        auto numeric = sepvae::testing::numeric_gradient(
            [&] { return term().item<double>(); }, params, 1e-5);
        const double err = sepvae::testing::max_relative_error(analytic, numeric);
        worst = std::max(worst, err);
        if (err >= 1e-4) {
            return {false, fmt("%s gradient rel err %.2e >= 1e-4", name, err)};
        }
    }
    const double secs = elapsed_s(t0);
    return {secs < 120.0, fmt("%lld params, 5 terms, worst rel err %.2e, %.1f s (limit 120)",
                              static_cast<long long>(n_params), worst, secs)};
}

// ---------------------------------------------------------------- criterion 3

Outcome check_mi_discrimination() {
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig cfg;
    cfg.image_shape = {1, 16, 16};
    cfg.d_common = 8;
    cfg.d_salient = 8;
    cfg.encoder_channels = {4};
    cfg.hidden_width = 8;
    cfg.classifier_hidden = 8;
    cfg.discriminator_hidden = 64;

    const int64_t B = 256;
    auto train_disc = [&](bool dependent, SepVaeModel& model) {
        torch::optim::Adam opt(model.discriminator_parameters(),
                               torch::optim::AdamOptions(1e-3));
        double bce = 0.0;
        for (int step = 0; step < 500; ++step) {
            auto c = torch::randn({B, 8});
            auto s = dependent ? c.clone() : torch::randn({B, 8});
            JointBatch joint{c, s, BatchProvenance::joint};
            auto shuffled = shuffle_salient(joint, 5000 + static_cast<uint64_t>(step));
            bce = discriminator_step(joint, shuffled, model, opt);
        }
        return bce / 2.0;  // per-example BCE (the step reports the two-term sum)
    };

    torch::manual_seed(100);
    SepVaeModel indep_model(cfg);
    train_disc(false, indep_model);
    auto c = torch::randn({B, 8});
    const double mi_indep =
        mi_penalty({c, torch::randn({B, 8}), BatchProvenance::joint}, indep_model)
            .item<double>();

    torch::manual_seed(100);
    SepVaeModel dep_model(cfg);
    const double bce_dep = train_disc(true, dep_model);
    auto c2 = torch::randn({B, 8});
    const double mi_dep =
        mi_penalty({c2, c2.clone(), BatchProvenance::joint}, dep_model).item<double>();

    const double secs = elapsed_s(t0);
    const bool pass = mi_indep < 0.1 && mi_dep > 1.0 && bce_dep < 0.6 && secs < 60.0;
    return {pass, fmt("indep mi=%.4f (<0.1), dep mi=%.3f (>1.0), dep bce=%.3f (<0.6), "
                      "%.1f s (limit 60)",
                      mi_indep, mi_dep, bce_dep, secs)};
}

// ---------------------------------------------------------------- criterion 4

Outcome check_parameter_isolation() {
    ModelConfig cfg;
    cfg.image_shape = {1, 16, 16};
    cfg.d_common = 4;
    cfg.d_salient = 3;
    cfg.encoder_channels = {4};
    cfg.hidden_width = 8;
    cfg.classifier_hidden = 6;
    cfg.discriminator_hidden = 8;

    torch::manual_seed(200);
    SepVaeModel model(cfg);
    torch::optim::Adam main_opt(model.main_parameters(), torch::optim::AdamOptions(1e-3));
    torch::optim::Adam disc_opt(model.discriminator_parameters(),
                                torch::optim::AdamOptions(1e-3));
    LossWeights w;

    for (int step = 0; step < 100; ++step) {
        auto x = torch::rand({8, 1, 16, 16});
        auto y = torch::tensor({0, 1, 0, 1, 0, 1, 0, 1}, torch::kInt64);

        // Discriminator phase must leave the main networks untouched.
        auto main_before = sepvae::testing::snapshot(model.main_parameters());
        {
            LatentCode latent;
            {
                torch::NoGradGuard no_grad;
                latent = model.forward(x, y, w.use_frozen_bg_std, w.sigma_q_bg);
            }
            JointBatch joint{latent.common_sample.detach(), latent.salient_sample.detach(),
                             BatchProvenance::joint};
            auto shuffled = shuffle_salient(joint, static_cast<uint64_t>(step));
            discriminator_step(joint, shuffled, model, disc_opt);
        }
        if (!sepvae::testing::bitwise_equal(
                main_before, sepvae::testing::snapshot(model.main_parameters()))) {
            return {false, fmt("discriminator step moved a main parameter at step %d", step)};
        }

        // Main phase (including the MI penalty) must leave lambda untouched.
        auto disc_before = sepvae::testing::snapshot(model.discriminator_parameters());
        auto latent = model.forward(x, y, w.use_frozen_bg_std, w.sigma_q_bg);
        auto mi = mi_penalty({latent.common_sample, latent.salient_sample,
                              BatchProvenance::joint},
                             model);
        torch::Tensor total;
        total_loss(x, y, latent, w, model, mi, &total);
        main_opt.zero_grad();
        total.backward();
        main_opt.step();
        if (!sepvae::testing::bitwise_equal(
                disc_before, sepvae::testing::snapshot(model.discriminator_parameters()))) {
            return {false, fmt("main step moved a discriminator parameter at step %d", step)};
        }
    }
    return {true, "100 alternating steps, both directions bitwise clean"};
}

// ------------------------------------------------------- criteria 5-7 shared

struct EndToEnd {
    std::vector<nlohmann::ordered_json> full;     // per-seed summaries
    std::vector<nlohmann::ordered_json> ablated;  // no_mi_sal_clsf summaries
    double slowest_run_s = 0.0;
    SepVaeModel* seed0_model = nullptr;  // kept alive for criterion 9
    ContrastiveDataset dataset;
    SplitIndices splits;
};

double mean_of(const std::vector<nlohmann::ordered_json>& runs, const char* key) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r[key].get<double>();
    return sum / runs.size();
}

TrainConfig synthetic_train_config(uint64_t seed) {
    TrainConfig cfg;
    cfg.model = ModelConfig::small_synthetic();
    cfg.epochs = 30;
    cfg.batch_size = 128;
    cfg.seed = seed;
    cfg.checkpoint_every = 1000;  // no intermediate checkpoints needed here
    // The salient cue below is a small faint square: reconstruction alone
    // barely benefits from encoding it, so the classification term has to
    // drive the salient encoder. A large kappa amplifies that bootstrap, and
    // the frozen background std is disabled because its label-conditioned
    // sampling asymmetry lets f_xi satisfy the BCE through sample radius
    // alone, starving the encoder of classification gradient.
    cfg.weights.gamma = 0.5;
    cfg.weights.kappa = 10.0;
    cfg.weights.beta_s = 0.25;
    cfg.weights.use_frozen_bg_std = false;
    cfg.disc_steps_per_main = 2;
    return cfg;
}

EndToEnd run_end_to_end(SepVaeModel& seed0_storage) {
    EndToEnd out;

    DataGenConfig data_cfg;  // 2000 BG + 2000 TG, 32x32, 2 subtypes
    data_cfg.seed = 0;
    // A subtle cue: a 3-pixel square whose brightness overlaps the common
    // content, under pixel noise. Its reconstruction value is tiny, so a
    // purely reconstructive salient space under-ranks borderline squares
    // while the classification-supervised one does not.
    data_cfg.salient_intensity = {0.52, 0.75};
    data_cfg.salient_side = 3;
    data_cfg.noise_std = 0.07;
    out.dataset = generate_synthetic(data_cfg).first;
    out.splits = split(out.dataset, 0.8, 0.1, 0.1, 0, /*stratify_on_y=*/true);
    auto train_set = out.dataset.select(out.splits.train);

    for (uint64_t seed : {0, 1, 2}) {
        const auto t0 = std::chrono::steady_clock::now();
        auto cfg = synthetic_train_config(seed);
        auto result = fit(cfg, train_set);
        auto metrics = evaluate_model(result.model, out.dataset, out.splits, seed);
        out.full.push_back(metrics["summary"]);
        out.slowest_run_s = std::max(out.slowest_run_s, elapsed_s(t0));
        if (seed == 0) {
            seed0_storage = result.model;
            out.seed0_model = &seed0_storage;
        }

        auto ablated_cfg = cfg;
        ablated_cfg.weights = apply_ablation(cfg.weights, "no_mi_sal_clsf");
        const auto t1 = std::chrono::steady_clock::now();
        auto ablated = fit(ablated_cfg, train_set);
        auto ablated_metrics = evaluate_model(ablated.model, out.dataset, out.splits, seed,
                                              "", BgVsTgMethod::baseline);
        out.ablated.push_back(ablated_metrics["summary"]);
        out.slowest_run_s = std::max(out.slowest_run_s, elapsed_s(t1));
    }
    return out;
}

Outcome check_separation(const EndToEnd& e2e) {
    const double sal_acc = mean_of(e2e.full, "salient_subtype_acc");
    const double com_acc = mean_of(e2e.full, "common_subtype_acc");
    const double com_mae = mean_of(e2e.full, "common_attr_mae_mean");
    const double sal_mae = mean_of(e2e.full, "salient_attr_mae_mean");
    const double auc = mean_of(e2e.full, "salient_bg_tg_auc");

    const bool pass = sal_acc >= 0.85 && com_acc <= sal_acc - 0.15 && com_mae < sal_mae &&
                      auc >= 0.90 && e2e.slowest_run_s < 600.0;
    return {pass, fmt("sal acc=%.3f (>=0.85), com acc=%.3f (<=%.3f), "
                      "mae com/sal=%.3f/%.3f, f_xi auc=%.3f (>=0.90), "
                      "slowest run %.0f s (limit 600)",
                      sal_acc, com_acc, sal_acc - 0.15, com_mae, sal_mae, auc,
                      e2e.slowest_run_s)};
}

Outcome check_variance_ratio(const EndToEnd& e2e) {
    double ratio = mean_of(e2e.full, "variance_ratio_tg_over_bg");
    return {ratio >= 5.0, fmt("mean target/background salient variance ratio %.2f (>=5)",
                              ratio)};
}

Outcome check_ablation_ordering(const EndToEnd& e2e) {
    const double full_acc = mean_of(e2e.full, "salient_subtype_acc");
    const double abl_acc = mean_of(e2e.ablated, "salient_subtype_acc");
    const double full_auc = mean_of(e2e.full, "salient_bg_tg_auc");
    const double abl_auc = mean_of(e2e.ablated, "salient_bg_tg_auc");

    const bool pass = full_acc >= abl_acc && full_auc - abl_auc >= 0.05;
    return {pass, fmt("subtype acc full=%.3f vs ablated=%.3f, "
                      "bg/tg auc full=%.3f vs ablated=%.3f (margin %.3f >= 0.05)",
                      full_acc, abl_acc, full_auc, abl_auc, full_auc - abl_auc)};
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome check_determinism() {
    DataGenConfig data_cfg;
    data_cfg.n_background = 256;
    data_cfg.n_target = 256;
    data_cfg.seed = 4;
    auto dataset = generate_synthetic(data_cfg).first;
    auto splits = split(dataset, 0.8, 0.1, 0.1, 0, true);
    auto train_set = dataset.select(splits.train);

    auto cfg = synthetic_train_config(3);
    cfg.epochs = 3;

    const auto root = fs::temp_directory_path() / "sepvae_acceptance_det";
    fs::remove_all(root);
    std::vector<std::string> csvs, jsons;
    for (int run = 0; run < 2; ++run) {
        const auto run_dir = root / ("run" + std::to_string(run));
        auto result = fit(cfg, train_set, run_dir.string());
        auto metrics = evaluate_model(result.model, dataset, splits, cfg.seed);
        csvs.push_back(slurp(run_dir / "train_log.csv"));
        jsons.push_back(metrics.dump(2));
    }
    fs::remove_all(root);

    const bool pass = !csvs[0].empty() && csvs[0] == csvs[1] && jsons[0] == jsons[1];
    return {pass, pass ? "two identical runs: training CSV and metrics JSON byte-equal"
                       : "repeat run diverged"};
}

// ---------------------------------------------------------------- criterion 9

Outcome check_null_calibration(const EndToEnd& e2e) {
    auto latents = extract_latents(*e2e.seed0_model, e2e.dataset);
    torch::manual_seed(900);

    // Row sets matching the real evaluation: subtype probes on target rows,
    // attribute probes on all rows.
    auto in_set = [](const std::vector<int64_t>& v, int64_t i) {
        return std::binary_search(v.begin(), v.end(), i);
    };
    std::vector<int64_t> tg_train, tg_test;
    for (int64_t i = 0; i < e2e.dataset.size(); ++i) {
        if (e2e.dataset.labels[i].item<int64_t>() != 1) continue;
        if (in_set(e2e.splits.train, i)) tg_train.push_back(i);
        if (in_set(e2e.splits.test, i)) tg_test.push_back(i);
    }

    std::ostringstream detail;
    const auto spaces = std::vector<std::pair<const char*, torch::Tensor>>{
        {"common", latents.common}, {"salient", latents.salient}};

    for (const auto& [space_name, space] : spaces) {
        // Permuted subtype classification (targets shuffled within the
        // target rows): chance is the majority frequency of the permuted
        // training labels.
        {
            std::vector<int64_t> tg_rows;
            for (int64_t i = 0; i < e2e.dataset.size(); ++i) {
                if (e2e.dataset.labels[i].item<int64_t>() == 1) tg_rows.push_back(i);
            }
            auto shuffled = e2e.dataset.subtype.clone();
            auto perm = torch::randperm(static_cast<int64_t>(tg_rows.size()));
            for (size_t j = 0; j < tg_rows.size(); ++j) {
                shuffled[tg_rows[j]] =
                    e2e.dataset.subtype[tg_rows[perm[j].item<int64_t>()]];
            }
            auto probe = run_probe(space, shuffled, ProbeTask::classification, tg_train,
                                   tg_test, 0);
            double majority = 0.0;
            for (int64_t k = 0; k < 2; ++k) {
                int64_t count = 0;
                for (int64_t i : tg_train) count += shuffled[i].item<int64_t>() == k;
                majority = std::max(majority, static_cast<double>(count) / tg_train.size());
            }
            const double se = std::sqrt(majority * (1.0 - majority) / tg_test.size());
            if (std::abs(probe.value - majority) > 3.0 * se) {
                return {false, fmt("%s/subtype null acc %.3f vs chance %.3f (3se=%.3f)",
                                   space_name, probe.value, majority, 3.0 * se)};
            }
        }
        // Permuted regression targets: chance is the constant-mean predictor.
        for (size_t k = 0; k < e2e.dataset.attribute_names.size(); ++k) {
            auto target = e2e.dataset.attributes.select(1, static_cast<int64_t>(k));
            auto perm = torch::randperm(e2e.dataset.size());
            auto shuffled = target.index_select(0, perm);
            auto probe = run_probe(space, shuffled, ProbeTask::regression, e2e.splits.train,
                                   e2e.splits.test, 0);

            double train_mean = 0.0;
            for (int64_t i : e2e.splits.train) train_mean += shuffled[i].item<double>();
            train_mean /= e2e.splits.train.size();
            std::vector<double> devs;
            for (int64_t i : e2e.splits.test) {
                devs.push_back(std::abs(shuffled[i].item<double>() - train_mean));
            }
            double chance = 0.0, var = 0.0;
            for (double d : devs) chance += d;
            chance /= devs.size();
            for (double d : devs) var += (d - chance) * (d - chance);
            const double se = std::sqrt(var / (devs.size() - 1) / devs.size());
            if (std::abs(probe.value - chance) > 3.0 * se) {
                return {false,
                        fmt("%s/%s null mae %.3f vs chance %.3f (3se=%.3f)", space_name,
                            e2e.dataset.attribute_names[k].c_str(), probe.value, chance,
                            3.0 * se)};
            }
        }
    }
    return {true, "12 space/target pairs all within 3 SE of chance"};
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(std::max(1u, std::thread::hardware_concurrency()));

    // Optional criterion ids on the command line restrict the run.
    std::vector<bool> wanted(10, argc <= 1);
    for (int i = 1; i < argc; ++i) {
        const int id = std::atoi(argv[i]);
        if (id >= 1 && id <= 9) wanted[id] = true;
    }

    int failures = 0;
    auto run = [&](int id, const char* name, const Outcome& o) {
        report(id, name, o);
        if (!o.pass) ++failures;
    };

    if (wanted[1]) run(1, "kl-oracle", check_kl_oracle());
    if (wanted[2]) run(2, "gradients", check_gradients());
    if (wanted[3]) run(3, "mi-discrimination", check_mi_discrimination());
    if (wanted[4]) run(4, "parameter-isolation", check_parameter_isolation());

    SepVaeModel seed0_model{ModelConfig::small_synthetic()};
    if (wanted[5] || wanted[6] || wanted[7] || wanted[9]) {
        auto e2e = run_end_to_end(seed0_model);
        if (wanted[5]) run(5, "end-to-end-separation", check_separation(e2e));
        if (wanted[6]) run(6, "variance-ratio", check_variance_ratio(e2e));
        if (wanted[7]) run(7, "ablation-ordering", check_ablation_ordering(e2e));
        if (wanted[8]) run(8, "determinism", check_determinism());
        if (wanted[9]) run(9, "null-calibration", check_null_calibration(e2e));
    } else if (wanted[8]) {
        run(8, "determinism", check_determinism());
    }

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all 9 acceptance criteria passed\n");
    return 0;
}
