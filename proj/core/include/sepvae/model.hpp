#ifndef SEPVAE_MODEL_HPP
#define SEPVAE_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>
#include <nlohmann/json.hpp>

#include "sepvae/distributions.hpp"

namespace sepvae {

struct ModelConfig {
    std::vector<int64_t> image_shape{1, 32, 32};  // (C, H, W)
    int64_t d_common = 8;
    int64_t d_salient = 4;
    std::vector<int64_t> encoder_channels{32, 64};
    int64_t hidden_width = 64;
    int64_t classifier_hidden = 32;
    int64_t discriminator_hidden = 64;
    bool sigmoid_output = false;

    void validate() const;
    int64_t pixels() const { return image_shape[0] * image_shape[1] * image_shape[2]; }

    /// 64x64 RGB setup: 5 stride-2 convs (32,32,64,128,256), hidden 32, D=16.
    static ModelConfig paper_2d();
    /// Desk-scale grayscale setup for synthetic experiments.
    static ModelConfig small_synthetic();

    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Convolutional encoder emitting a diagonal Gaussian over a latent space.
/// Each of the mean / log-variance heads is two linear layers.
class GaussianEncoderImpl : public torch::nn::Module {
public:
    GaussianEncoderImpl(const ModelConfig& cfg, int64_t latent_dim);
    DiagGaussian forward(const torch::Tensor& x);

private:
    torch::nn::Sequential conv_{nullptr};
    torch::nn::Sequential mean_head_{nullptr};
    torch::nn::Sequential log_var_head_{nullptr};
    std::vector<int64_t> image_shape_;
};
TORCH_MODULE(GaussianEncoder);

/// Mirror of the encoder: linear layers back to the conv grid, then
/// stride-2 transposed convolutions up to the image shape.
class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& common, const torch::Tensor& salient);

private:
    torch::nn::Sequential net_{nullptr};
    int64_t d_common_;
    int64_t d_salient_;
};
TORCH_MODULE(Decoder);

/// Two-layer MLP with a sigmoid output clamped away from {0,1}.
class BinaryMlpImpl : public torch::nn::Module {
public:
    BinaryMlpImpl(int64_t in_dim, int64_t hidden);
    torch::Tensor forward(const torch::Tensor& z);

private:
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(BinaryMlp);

constexpr double kProbClamp = 1e-7;

struct LatentCode {
    DiagGaussian common_posterior;
    DiagGaussian salient_posterior;
    torch::Tensor common_sample;
    torch::Tensor salient_sample;
};

/// The five networks: common encoder, salient encoder, decoder, salient
/// classifier and MI discriminator. The discriminator's parameters belong
/// to the discriminator optimizer only; the training loop enforces that.
class SepVaeModel {
public:
    explicit SepVaeModel(const ModelConfig& cfg);

    ModelConfig config;
    GaussianEncoder common_encoder{nullptr};
    GaussianEncoder salient_encoder{nullptr};
    Decoder decoder{nullptr};
    BinaryMlp classifier{nullptr};
    BinaryMlp discriminator{nullptr};

    DiagGaussian encode_common(const torch::Tensor& x);
    /// In frozen mode the y=0 rows get log-variance log(sigma_q_bg^2);
    /// everything else is the network's prediction.
    DiagGaussian encode_salient(const torch::Tensor& x, const torch::Tensor& y,
                                bool frozen_bg_std, double sigma_q_bg);
    torch::Tensor decode(const torch::Tensor& common, const torch::Tensor& salient);
    torch::Tensor classify_salient(const torch::Tensor& salient);
    torch::Tensor discriminate_joint(const torch::Tensor& common, const torch::Tensor& salient);

    LatentCode forward(const torch::Tensor& x, const torch::Tensor& y,
                       bool frozen_bg_std, double sigma_q_bg);

    /// Parameters updated by the main optimizer (phi_c, phi_s, theta, xi).
    std::vector<torch::Tensor> main_parameters() const;
    /// Parameters updated by the discriminator optimizer (lambda).
    std::vector<torch::Tensor> discriminator_parameters() const;

    void to(torch::Dtype dtype);
};

/// Writes weights plus a JSON manifest {config, epoch, seed, git-describe}
/// next to the archive (path + ".json").
void save_checkpoint(const SepVaeModel& model, const std::string& path, int64_t epoch,
                     uint64_t seed);
/// Loads weights into a model built from the manifest's config.
SepVaeModel load_checkpoint(const std::string& path, int64_t* epoch_out = nullptr);

}  // namespace sepvae

#endif
