#include "sepvae/losses.hpp"

namespace sepvae {

void LossWeights::validate() const {
    SEPVAE_CHECK(beta_c >= 0.0 && beta_s >= 0.0 && kappa >= 0.0 && gamma >= 0.0,
                 "loss weights must be non-negative");
    SEPVAE_CHECK(sigma_p > 0.0 && sigma_p < 1.0, "sigma_p must be in (0,1)");
    SEPVAE_CHECK(sigma_q_bg > 0.0, "sigma_q_bg must be > 0");
}

LossWeights LossWeights::paper_celeba() {
    LossWeights w;
    w.beta_c = 0.5;
    w.beta_s = 0.5;
    w.kappa = 2.0;
    w.gamma = 1e-10;
    w.sigma_p = 0.025;
    return w;
}

nlohmann::ordered_json LossWeights::to_json() const {
    return nlohmann::ordered_json{
        {"beta_c", beta_c},
        {"beta_s", beta_s},
        {"kappa", kappa},
        {"gamma", gamma},
        {"sigma_p", sigma_p},
        {"sigma_q_bg", sigma_q_bg},
        {"use_frozen_bg_std", use_frozen_bg_std},
        {"use_appendix_surrogate", use_appendix_surrogate},
        {"ablate_mi", ablate_mi},
        {"ablate_clsf", ablate_clsf},
        {"ablate_sal", ablate_sal}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
    LossWeights w;
    w.beta_c = j.value("beta_c", w.beta_c);
    w.beta_s = j.value("beta_s", w.beta_s);
    w.kappa = j.value("kappa", w.kappa);
    w.gamma = j.value("gamma", w.gamma);
    w.sigma_p = j.value("sigma_p", w.sigma_p);
    w.sigma_q_bg = j.value("sigma_q_bg", w.sigma_q_bg);
    w.use_frozen_bg_std = j.value("use_frozen_bg_std", w.use_frozen_bg_std);
    w.use_appendix_surrogate = j.value("use_appendix_surrogate", w.use_appendix_surrogate);
    w.ablate_mi = j.value("ablate_mi", w.ablate_mi);
    w.ablate_clsf = j.value("ablate_clsf", w.ablate_clsf);
    w.ablate_sal = j.value("ablate_sal", w.ablate_sal);
    w.validate();
    return w;
}

torch::Tensor conditional_reconstruction_loss(const torch::Tensor& x,
                                              const torch::Tensor& c_sample,
                                              const torch::Tensor& s_sample,
                                              const torch::Tensor& y, SepVaeModel& model) {
    SEPVAE_CHECK(x.dim() == 4, "expected a (B,C,H,W) image batch");
    SEPVAE_CHECK(x.size(0) == c_sample.size(0) && x.size(0) == s_sample.size(0),
                 "batch size mismatch");
    auto y_col = y.to(s_sample.dtype()).unsqueeze(-1);
    auto s_in = y_col * s_sample;  // y=0 rows decode from s'=0
    auto recon = model.decode(c_sample, s_in);
    return (x - recon).square().flatten(1).sum(-1).mean();
}

torch::Tensor common_prior_loss(const DiagGaussian& common_posterior) {
    return kl_to_standard_normal(common_posterior).mean();
}

torch::Tensor salient_prior_loss(const DiagGaussian& salient_posterior,
                                 const torch::Tensor& y, const LossWeights& weights) {
    weights.validate();
    auto y_f = y.to(salient_posterior.mean.dtype());
    auto kl_target = kl_to_standard_normal(salient_posterior);
    torch::Tensor bg_term;
    if (weights.use_appendix_surrogate) {
        bg_term = salient_posterior.mean.square().sum(-1) / weights.sigma_p;
    } else {
        auto center = torch::zeros({salient_posterior.dim()},
                                   salient_posterior.mean.options());
        bg_term = kl_to_isotropic(salient_posterior, center, weights.sigma_p);
    }
    return (y_f * kl_target + (1.0 - y_f) * bg_term).mean();
}

torch::Tensor salient_classification_loss(const torch::Tensor& s_samples,
                                          const torch::Tensor& y, SepVaeModel& model) {
    SEPVAE_CHECK(s_samples.size(0) >= 1, "empty batch");
    auto p = model.classify_salient(s_samples);
    auto y_f = y.to(p.dtype());
    return -(y_f * torch::log(p) + (1.0 - y_f) * torch::log(1.0 - p)).mean();
}

LossBreakdown total_loss(const torch::Tensor& x, const torch::Tensor& y,
                         const LatentCode& latent, const LossWeights& weights,
                         SepVaeModel& model, const torch::Tensor& mi_penalty_value,
                         torch::Tensor* total_out) {
    weights.validate();
    LossBreakdown breakdown;

    auto rec = conditional_reconstruction_loss(x, latent.common_sample,
                                               latent.salient_sample, y, model);
    auto total = rec;
    breakdown.reconstruction = rec.item<double>();

    auto kl_c = common_prior_loss(latent.common_posterior);
    breakdown.kl_common = kl_c.item<double>();
    total = total + weights.beta_c * kl_c;

    if (!weights.ablate_sal) {
        auto kl_s = salient_prior_loss(latent.salient_posterior, y, weights);
        breakdown.kl_salient = kl_s.item<double>();
        total = total + weights.beta_s * kl_s;
    }
    if (!weights.ablate_clsf) {
        auto clsf = salient_classification_loss(latent.salient_sample, y, model);
        breakdown.classification = clsf.item<double>();
        total = total + weights.kappa * clsf;
    }
    if (!weights.ablate_mi && mi_penalty_value.defined()) {
        breakdown.mutual_information = mi_penalty_value.item<double>();
        total = total + weights.gamma * mi_penalty_value;
    }

    breakdown.total = breakdown.reconstruction + weights.beta_c * breakdown.kl_common +
                      weights.beta_s * breakdown.kl_salient +
                      weights.kappa * breakdown.classification +
                      weights.gamma * breakdown.mutual_information;
    if (total_out) {
        *total_out = total;
    }
    return breakdown;
}

}  // namespace sepvae
