#ifndef SEPVAE_DISTRIBUTIONS_HPP
#define SEPVAE_DISTRIBUTIONS_HPP

#include <cstdint>

#include <torch/torch.h>

#include "sepvae/common.hpp"

namespace sepvae {

/// Diagonal Gaussian parameterized by mean and log-variance.
///
/// Tensors are either (D) for a single distribution or (B, D) for a batch;
/// the latent dimension is always the last axis. Log-variance (rather than
/// std) keeps the parameterization unconstrained for optimization.
struct DiagGaussian {
    torch::Tensor mean;
    torch::Tensor log_variance;

    DiagGaussian() = default;
    DiagGaussian(torch::Tensor mean_, torch::Tensor log_variance_);

    int64_t dim() const { return mean.size(-1); }

    torch::Tensor std() const { return torch::exp(0.5 * log_variance); }
    torch::Tensor variance() const { return torch::exp(log_variance); }
};

/// mean + exp(0.5 * log_var) * noise. `noise` must match the mean's shape.
torch::Tensor sample_reparameterized(const DiagGaussian& g, const torch::Tensor& noise);

/// KL(g || N(0, I)), summed over the latent dimension.
/// Returns a scalar for a (D) input, a (B) tensor for a (B, D) batch.
torch::Tensor kl_to_standard_normal(const DiagGaussian& g);

/// KL(g || N(center, prior_variance * I)), summed over the latent dimension.
torch::Tensor kl_to_isotropic(const DiagGaussian& g, const torch::Tensor& center,
                              double prior_variance);

/// An isotropic Gaussian prior N(center, variance * I).
struct IsotropicPrior {
    torch::Tensor center;
    double variance = 1.0;
};

/// Monte-Carlo estimates of KL(g || prior) for a single (D) Gaussian and
/// several priors, sharing one set of reparameterized draws: mean of
/// log q(z) - log p(z). Test oracle; independent of the closed forms above.
std::vector<double> kl_monte_carlo_oracle(const DiagGaussian& g,
                                          const std::vector<IsotropicPrior>& priors,
                                          int64_t n_samples, uint64_t seed);

/// Single-prior convenience wrapper.
double kl_monte_carlo_oracle(const DiagGaussian& g, const torch::Tensor& center,
                             double prior_variance, int64_t n_samples, uint64_t seed);

}  // namespace sepvae

#endif
