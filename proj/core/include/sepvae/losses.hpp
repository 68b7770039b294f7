#ifndef SEPVAE_LOSSES_HPP
#define SEPVAE_LOSSES_HPP

#include <torch/torch.h>
#include <nlohmann/json.hpp>

#include "sepvae/model.hpp"

namespace sepvae {

/// Objective weights, prior constants and ablation switches.
///
/// Defaults are the desk-scale synthetic settings; `paper_celeba()` gives
/// the published CelebA values.
struct LossWeights {
    double beta_c = 0.5;        // common prior KL weight
    double beta_s = 0.5;        // salient prior KL weight
    double kappa = 1.0;         // salient classification weight
    double gamma = 1.0;         // mutual-information weight
    double sigma_p = 0.025;     // background salient prior variance, in (0,1)
    double sigma_q_bg = 0.1;    // frozen background salient posterior std
    bool use_frozen_bg_std = true;
    bool use_appendix_surrogate = true;
    bool ablate_mi = false;
    bool ablate_clsf = false;
    bool ablate_sal = false;

    void validate() const;

    static LossWeights paper_celeba();  // beta 0.5/0.5, kappa 2, gamma 1e-10

    nlohmann::ordered_json to_json() const;
    static LossWeights from_json(const nlohmann::json& j);
};

/// Per-term values of one evaluation of the objective. Terms are stored
/// unweighted; `total` applies the weights (ablated terms are exactly 0).
struct LossBreakdown {
    double reconstruction = 0.0;
    double kl_common = 0.0;
    double kl_salient = 0.0;
    double classification = 0.0;
    double mutual_information = 0.0;
    double total = 0.0;
};

/// Squared error between x and decode(c, y*s + (1-y)*s'), summed over
/// pixels, averaged over the batch. Background rows decode from s'=0, so
/// their salient samples receive no gradient.
torch::Tensor conditional_reconstruction_loss(const torch::Tensor& x,
                                              const torch::Tensor& c_sample,
                                              const torch::Tensor& s_sample,
                                              const torch::Tensor& y, SepVaeModel& model);

/// KL(q(c|x) || N(0,I)), batch-averaged.
torch::Tensor common_prior_loss(const DiagGaussian& common_posterior);

/// Batch-averaged salient prior: target rows against N(0,I); background
/// rows against N(s', sigma_p I) or the ||mu||^2 / sigma_p surrogate.
torch::Tensor salient_prior_loss(const DiagGaussian& salient_posterior,
                                 const torch::Tensor& y, const LossWeights& weights);

/// BCE of the salient classifier on reparameterized salient samples.
torch::Tensor salient_classification_loss(const torch::Tensor& s_samples,
                                          const torch::Tensor& y, SepVaeModel& model);

/// Evaluates the full objective. `mi_penalty_value` is the already computed
/// MI estimate (a scalar tensor carrying gradient to the encoders), or an
/// undefined tensor when the MI term is ablated.
/// `total_out`, when given, receives the differentiable total.
LossBreakdown total_loss(const torch::Tensor& x, const torch::Tensor& y,
                         const LatentCode& latent, const LossWeights& weights,
                         SepVaeModel& model, const torch::Tensor& mi_penalty_value,
                         torch::Tensor* total_out = nullptr);

}  // namespace sepvae

#endif
