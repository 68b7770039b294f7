#include "sepvae/distributions.hpp"

#include <cmath>

namespace sepvae {

DiagGaussian::DiagGaussian(torch::Tensor mean_, torch::Tensor log_variance_)
    : mean(std::move(mean_)), log_variance(std::move(log_variance_)) {
    SEPVAE_CHECK(mean.sizes() == log_variance.sizes(),
                 "mean and log_variance shapes differ");
    SEPVAE_CHECK(mean.size(-1) >= 1, "latent dimension must be >= 1");
}

torch::Tensor sample_reparameterized(const DiagGaussian& g, const torch::Tensor& noise) {
    SEPVAE_CHECK(noise.sizes() == g.mean.sizes(), "noise shape does not match mean");
    return g.mean + torch::exp(0.5 * g.log_variance) * noise;
}

torch::Tensor kl_to_standard_normal(const DiagGaussian& g) {
    SEPVAE_CHECK(torch::isfinite(g.mean).all().item<bool>() &&
                     torch::isfinite(g.log_variance).all().item<bool>(),
                 "non-finite Gaussian parameters");
    auto var = torch::exp(g.log_variance);
    return 0.5 * (var + g.mean.square() - 1.0 - g.log_variance).sum(-1);
}

torch::Tensor kl_to_isotropic(const DiagGaussian& g, const torch::Tensor& center,
                              double prior_variance) {
    SEPVAE_CHECK(prior_variance > 0.0, "prior_variance must be > 0");
    SEPVAE_CHECK(center.size(-1) == g.dim(), "center dimension mismatch");
    auto var = torch::exp(g.log_variance);
    auto per_dim = 0.5 * ((var + (g.mean - center).square()) / prior_variance - 1.0 +
                          std::log(prior_variance) - g.log_variance);
    return per_dim.sum(-1);
}

std::vector<double> kl_monte_carlo_oracle(const DiagGaussian& g,
                                          const std::vector<IsotropicPrior>& priors,
                                          int64_t n_samples, uint64_t seed) {
    SEPVAE_CHECK(n_samples >= 1, "n_samples must be >= 1");
    SEPVAE_CHECK(!priors.empty(), "at least one prior is required");
    SEPVAE_CHECK(g.mean.dim() == 1, "oracle expects a single (D) Gaussian");
    torch::NoGradGuard no_grad;

    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    auto mean = g.mean.to(torch::kFloat64);
    auto log_var = g.log_variance.to(torch::kFloat64);

    const int64_t d = mean.size(0);
    auto eps = torch::randn({n_samples, d}, gen, torch::kFloat64);
    auto z = mean + torch::exp(0.5 * log_var) * eps;

    // log q(z) - log p(z), constants and -d/2 log(2*pi) cancel; under the
    // reparameterization (z - mean)^2 / var is just eps^2.
    auto log_q = -0.5 * (log_var + eps.square()).sum(-1);

    std::vector<double> out;
    out.reserve(priors.size());
    for (const auto& prior : priors) {
        SEPVAE_CHECK(prior.variance > 0.0, "prior variance must be > 0");
        auto c = prior.center.to(torch::kFloat64);
        auto log_p = -0.5 * (std::log(prior.variance) * static_cast<double>(d) +
                             (z - c).square().sum(-1) / prior.variance);
        out.push_back((log_q - log_p).mean().item<double>());
    }
    return out;
}

double kl_monte_carlo_oracle(const DiagGaussian& g, const torch::Tensor& center,
                             double prior_variance, int64_t n_samples, uint64_t seed) {
    return kl_monte_carlo_oracle(g, {{center, prior_variance}}, n_samples, seed)[0];
}

}  // namespace sepvae
