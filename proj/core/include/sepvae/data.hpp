#ifndef SEPVAE_DATA_HPP
#define SEPVAE_DATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>
#include <nlohmann/json.hpp>

#include "sepvae/common.hpp"

namespace sepvae {

/// In-memory contrastive dataset. Background rows (y=0) carry NaN salient
/// factors and subtype -1; images live in [0,1].
struct ContrastiveDataset {
    torch::Tensor images;           // (N, C, H, W) float32
    torch::Tensor labels;           // (N) int64 in {0,1}
    std::vector<std::string> attribute_names;  // continuous probe targets
    torch::Tensor attributes;       // (N, K) float64, NaN where missing
    torch::Tensor subtype;          // (N) int64, -1 for background
    torch::Tensor salient_factors;  // (N, M) float64, NaN for background

    int64_t size() const { return images.defined() ? images.size(0) : 0; }
    ContrastiveDataset select(const std::vector<int64_t>& indices) const;
};

struct FactorRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct DataGenConfig {
    int64_t n_background = 2000;
    int64_t n_target = 2000;
    int64_t image_height = 32;
    int64_t image_width = 32;
    double target_fraction = 0.5;  // p(y); recorded, counts are explicit
    int64_t n_subtypes = 2;
    FactorRange gradient_angle{0.0, 6.283185307179586};
    FactorRange disk_u{-0.5, 0.5};
    FactorRange disk_v{-0.5, 0.5};
    FactorRange disk_r{0.12, 0.3};
    FactorRange salient_intensity{0.7, 1.0};
    int64_t salient_side = 0;  // square side in pixels; 0 = auto (height / 5)
    double noise_std = 0.02;
    uint64_t seed = 0;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static DataGenConfig from_json(const nlohmann::json& j);
};

struct SplitIndices {
    std::vector<int64_t> train, val, test;
};

struct DatasetManifest {
    nlohmann::ordered_json config;
    std::string config_hash;
    uint64_t seed = 0;
    SplitIndices splits;
    nlohmann::ordered_json samples;  // per-sample factor table

    nlohmann::ordered_json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Grayscale images with a linear intensity gradient (orientation theta)
/// and a disk (position, radius) as common content; targets additionally
/// get a bright square whose quadrant encodes the subtype and whose
/// intensity is a continuous salient factor. Deterministic given the seed;
/// each sample has its own RNG stream derived from (seed, index).
std::pair<ContrastiveDataset, DatasetManifest> generate_synthetic(const DataGenConfig& config);

/// Reads root/{images, labels.csv}: labels.csv columns are
/// filename,y,<attr...>; a "subtype" column is promoted to the subtype
/// field, everything else becomes a float attribute (NaN when empty).
ContrastiveDataset load_image_folder(const std::string& root_path,
                                     const std::string& labels_file,
                                     int64_t channels, int64_t height, int64_t width);

/// Writes the folder layout consumed by load_image_folder, plus
/// manifest.json. Pixels are quantized to 8 bits at generation time, so
/// the round trip is exact.
void save_dataset_folder(const ContrastiveDataset& dataset, const DatasetManifest& manifest,
                         const std::string& root_path);

/// Deterministic disjoint covering split; stratified keeps per-split label
/// proportions within one sample of the global proportion.
SplitIndices split(const ContrastiveDataset& dataset, double train_fraction,
                   double val_fraction, double test_fraction, uint64_t seed,
                   bool stratify_on_y);

std::string config_hash_hex(const nlohmann::json& config);

}  // namespace sepvae

#endif
