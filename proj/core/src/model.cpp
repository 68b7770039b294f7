#include "sepvae/model.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace sepvae {

void ModelConfig::validate() const {
    SEPVAE_CHECK(image_shape.size() == 3, "image_shape must be (C, H, W)");
    SEPVAE_CHECK(d_common >= 1 && d_salient >= 1, "latent dimensions must be >= 1");
    SEPVAE_CHECK(!encoder_channels.empty(), "encoder_channels must be non-empty");
    for (auto c : encoder_channels) {
        SEPVAE_CHECK(c > 0, "encoder_channels must be strictly positive");
    }
    const auto n = static_cast<int64_t>(encoder_channels.size());
    const int64_t stride_total = int64_t{1} << n;
    SEPVAE_CHECK(image_shape[1] % stride_total == 0 && image_shape[2] % stride_total == 0,
                 "image height/width must be divisible by 2^n_conv_layers");
}

ModelConfig ModelConfig::paper_2d() {
    ModelConfig cfg;
    cfg.image_shape = {3, 64, 64};
    cfg.d_common = 16;
    cfg.d_salient = 16;
    cfg.encoder_channels = {32, 32, 64, 128, 256};
    cfg.hidden_width = 32;
    cfg.classifier_hidden = 32;
    cfg.discriminator_hidden = 32;
    cfg.sigmoid_output = true;
    return cfg;
}

ModelConfig ModelConfig::small_synthetic() {
    ModelConfig cfg;
    cfg.image_shape = {1, 32, 32};
    cfg.d_common = 8;
    cfg.d_salient = 4;
    cfg.encoder_channels = {32, 64};
    cfg.hidden_width = 64;
    cfg.classifier_hidden = 32;
    cfg.discriminator_hidden = 64;
    cfg.sigmoid_output = true;
    return cfg;
}

nlohmann::ordered_json ModelConfig::to_json() const {
    return nlohmann::ordered_json{
        {"image_shape", image_shape},
        {"d_common", d_common},
        {"d_salient", d_salient},
        {"encoder_channels", encoder_channels},
        {"hidden_width", hidden_width},
        {"classifier_hidden", classifier_hidden},
        {"discriminator_hidden", discriminator_hidden},
        {"sigmoid_output", sigmoid_output}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.image_shape = j.at("image_shape").get<std::vector<int64_t>>();
    cfg.d_common = j.at("d_common").get<int64_t>();
    cfg.d_salient = j.at("d_salient").get<int64_t>();
    cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int64_t>>();
    cfg.hidden_width = j.at("hidden_width").get<int64_t>();
    cfg.classifier_hidden = j.value("classifier_hidden", int64_t{32});
    cfg.discriminator_hidden = j.value("discriminator_hidden", int64_t{64});
    cfg.sigmoid_output = j.value("sigmoid_output", false);
    cfg.validate();
    return cfg;
}

namespace {

int64_t conv_flat_size(const ModelConfig& cfg) {
    const auto n = static_cast<int64_t>(cfg.encoder_channels.size());
    const int64_t h = cfg.image_shape[1] >> n;
    const int64_t w = cfg.image_shape[2] >> n;
    return cfg.encoder_channels.back() * h * w;
}

}  // namespace

GaussianEncoderImpl::GaussianEncoderImpl(const ModelConfig& cfg, int64_t latent_dim)
    : image_shape_(cfg.image_shape) {
    cfg.validate();
    conv_ = torch::nn::Sequential();
    int64_t in_ch = cfg.image_shape[0];
    for (auto out_ch : cfg.encoder_channels) {
        conv_->push_back(torch::nn::Conv2d(
            torch::nn::Conv2dOptions(in_ch, out_ch, 4).stride(2).padding(1)));
        conv_->push_back(torch::nn::ReLU());
        in_ch = out_ch;
    }
    register_module("conv", conv_);

    const int64_t flat = conv_flat_size(cfg);
    mean_head_ = torch::nn::Sequential(
        torch::nn::Linear(flat, cfg.hidden_width), torch::nn::ReLU(),
        torch::nn::Linear(cfg.hidden_width, latent_dim));
    log_var_head_ = torch::nn::Sequential(
        torch::nn::Linear(flat, cfg.hidden_width), torch::nn::ReLU(),
        torch::nn::Linear(cfg.hidden_width, latent_dim));
    register_module("mean_head", mean_head_);
    register_module("log_var_head", log_var_head_);
}

DiagGaussian GaussianEncoderImpl::forward(const torch::Tensor& x) {
    SEPVAE_CHECK(x.dim() == 4 && x.size(1) == image_shape_[0] &&
                     x.size(2) == image_shape_[1] && x.size(3) == image_shape_[2],
                 "input does not match configured image shape");
    auto h = conv_->forward(x).flatten(1);
    return DiagGaussian(mean_head_->forward(h), log_var_head_->forward(h));
}

DecoderImpl::DecoderImpl(const ModelConfig& cfg)
    : d_common_(cfg.d_common), d_salient_(cfg.d_salient) {
    cfg.validate();
    const auto n = static_cast<int64_t>(cfg.encoder_channels.size());
    const int64_t h0 = cfg.image_shape[1] >> n;
    const int64_t w0 = cfg.image_shape[2] >> n;
    const int64_t flat = conv_flat_size(cfg);

    net_ = torch::nn::Sequential(
        torch::nn::Linear(cfg.d_common + cfg.d_salient, cfg.hidden_width),
        torch::nn::ReLU(),
        torch::nn::Linear(cfg.hidden_width, flat),
        torch::nn::ReLU(),
        torch::nn::Unflatten(torch::nn::UnflattenOptions(
            1, {cfg.encoder_channels.back(), h0, w0})));
    for (int64_t i = n - 1; i >= 0; --i) {
        const int64_t in_ch = cfg.encoder_channels[i];
        const int64_t out_ch = (i == 0) ? cfg.image_shape[0] : cfg.encoder_channels[i - 1];
        net_->push_back(torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(in_ch, out_ch, 4).stride(2).padding(1)));
        if (i > 0) {
            net_->push_back(torch::nn::ReLU());
        }
    }
    if (cfg.sigmoid_output) {
        net_->push_back(torch::nn::Sigmoid());
    }
    register_module("net", net_);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& common, const torch::Tensor& salient) {
    SEPVAE_CHECK(common.size(-1) == d_common_, "common latent dimension mismatch");
    SEPVAE_CHECK(salient.size(-1) == d_salient_, "salient latent dimension mismatch");
    auto z = torch::cat({common, salient}, -1);
    if (z.dim() == 1) {
        return net_->forward(z.unsqueeze(0)).squeeze(0);
    }
    return net_->forward(z);
}

BinaryMlpImpl::BinaryMlpImpl(int64_t in_dim, int64_t hidden) {
    fc1_ = register_module("fc1", torch::nn::Linear(in_dim, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, 1));
}

torch::Tensor BinaryMlpImpl::forward(const torch::Tensor& z) {
    auto h = torch::relu(fc1_->forward(z));
    auto p = torch::sigmoid(fc2_->forward(h)).squeeze(-1);
    return torch::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

SepVaeModel::SepVaeModel(const ModelConfig& cfg) : config(cfg) {
    cfg.validate();
    common_encoder = GaussianEncoder(cfg, cfg.d_common);
    salient_encoder = GaussianEncoder(cfg, cfg.d_salient);
    decoder = Decoder(cfg);
    classifier = BinaryMlp(cfg.d_salient, cfg.classifier_hidden);
    discriminator = BinaryMlp(cfg.d_common + cfg.d_salient, cfg.discriminator_hidden);
}

DiagGaussian SepVaeModel::encode_common(const torch::Tensor& x) {
    return common_encoder->forward(x);
}

DiagGaussian SepVaeModel::encode_salient(const torch::Tensor& x, const torch::Tensor& y,
                                         bool frozen_bg_std, double sigma_q_bg) {
    SEPVAE_CHECK(sigma_q_bg > 0.0, "sigma_q_bg must be > 0");
    auto g = salient_encoder->forward(x);
    if (!frozen_bg_std) {
        return g;
    }
    auto y_col = y.to(g.log_variance.dtype()).unsqueeze(-1);
    auto frozen = torch::full_like(g.log_variance, 2.0 * std::log(sigma_q_bg));
    return DiagGaussian(g.mean, y_col * g.log_variance + (1.0 - y_col) * frozen);
}

torch::Tensor SepVaeModel::decode(const torch::Tensor& common, const torch::Tensor& salient) {
    return decoder->forward(common, salient);
}

torch::Tensor SepVaeModel::classify_salient(const torch::Tensor& salient) {
    SEPVAE_CHECK(salient.size(-1) == config.d_salient, "salient dimension mismatch");
    return classifier->forward(salient);
}

torch::Tensor SepVaeModel::discriminate_joint(const torch::Tensor& common,
                                              const torch::Tensor& salient) {
    SEPVAE_CHECK(common.size(-1) == config.d_common &&
                     salient.size(-1) == config.d_salient,
                 "latent dimension mismatch");
    return discriminator->forward(torch::cat({common, salient}, -1));
}

LatentCode SepVaeModel::forward(const torch::Tensor& x, const torch::Tensor& y,
                                bool frozen_bg_std, double sigma_q_bg) {
    LatentCode code;
    code.common_posterior = encode_common(x);
    code.salient_posterior = encode_salient(x, y, frozen_bg_std, sigma_q_bg);
    code.common_sample = sample_reparameterized(code.common_posterior,
                                               torch::randn_like(code.common_posterior.mean));
    code.salient_sample = sample_reparameterized(code.salient_posterior,
                                                 torch::randn_like(code.salient_posterior.mean));
    return code;
}

std::vector<torch::Tensor> SepVaeModel::main_parameters() const {
    std::vector<torch::Tensor> params;
    for (const auto& m : {common_encoder->parameters(), salient_encoder->parameters(),
                          decoder->parameters(), classifier->parameters()}) {
        params.insert(params.end(), m.begin(), m.end());
    }
    return params;
}

std::vector<torch::Tensor> SepVaeModel::discriminator_parameters() const {
    return discriminator->parameters();
}

void SepVaeModel::to(torch::Dtype dtype) {
    common_encoder->to(dtype);
    salient_encoder->to(dtype);
    decoder->to(dtype);
    classifier->to(dtype);
    discriminator->to(dtype);
}

namespace {

std::string git_describe() {
    std::array<char, 128> buf{};
    std::string out = "unknown";
    if (FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r")) {
        if (fgets(buf.data(), buf.size(), pipe)) {
            out = buf.data();
            while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) {
                out.pop_back();
            }
        }
        pclose(pipe);
    }
    return out;
}

}  // namespace

void save_checkpoint(const SepVaeModel& model, const std::string& path, int64_t epoch,
                     uint64_t seed) {
    torch::serialize::OutputArchive archive;
    auto save_module = [&](const char* name, const std::shared_ptr<torch::nn::Module>& m) {
        torch::serialize::OutputArchive a;
        m->save(a);
        archive.write(name, a);
    };
    save_module("common_encoder", model.common_encoder.ptr());
    save_module("salient_encoder", model.salient_encoder.ptr());
    save_module("decoder", model.decoder.ptr());
    save_module("classifier", model.classifier.ptr());
    save_module("discriminator", model.discriminator.ptr());
    archive.save_to(path);

    nlohmann::ordered_json manifest{
        {"config", model.config.to_json()},
        {"epoch", epoch},
        {"seed", seed},
        {"git_describe", git_describe()}};
    std::ofstream out(path + ".json");
    out << manifest.dump(2) << "\n";
}

SepVaeModel load_checkpoint(const std::string& path, int64_t* epoch_out) {
    std::ifstream in(path + ".json");
    SEPVAE_CHECK(in.good(), "missing checkpoint manifest: " + path + ".json");
    nlohmann::json manifest = nlohmann::json::parse(in);
    SepVaeModel model(ModelConfig::from_json(manifest.at("config")));
    if (epoch_out) {
        *epoch_out = manifest.at("epoch").get<int64_t>();
    }

    torch::serialize::InputArchive archive;
    archive.load_from(path);
    auto load_module = [&](const char* name, const std::shared_ptr<torch::nn::Module>& m) {
        torch::serialize::InputArchive a;
        archive.read(name, a);
        m->load(a);
    };
    load_module("common_encoder", model.common_encoder.ptr());
    load_module("salient_encoder", model.salient_encoder.ptr());
    load_module("decoder", model.decoder.ptr());
    load_module("classifier", model.classifier.ptr());
    load_module("discriminator", model.discriminator.ptr());
    return model;
}

}  // namespace sepvae
