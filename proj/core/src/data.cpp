#include "sepvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace fs = std::filesystem;

namespace sepvae {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t sample_stream_seed(uint64_t seed, int64_t index) {
    return splitmix64(seed ^ splitmix64(static_cast<uint64_t>(index) + 1));
}

double uniform_in(std::mt19937_64& rng, const FactorRange& r) {
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

ContrastiveDataset ContrastiveDataset::select(const std::vector<int64_t>& indices) const {
    auto idx = torch::tensor(indices, torch::kInt64);
    ContrastiveDataset out;
    out.images = images.index_select(0, idx);
    out.labels = labels.index_select(0, idx);
    out.attribute_names = attribute_names;
    if (attributes.defined() && attributes.numel() > 0) {
        out.attributes = attributes.index_select(0, idx);
    } else {
        out.attributes = attributes;
    }
    out.subtype = subtype.index_select(0, idx);
    if (salient_factors.defined() && salient_factors.numel() > 0) {
        out.salient_factors = salient_factors.index_select(0, idx);
    } else {
        out.salient_factors = salient_factors;
    }
    return out;
}

void DataGenConfig::validate() const {
    SEPVAE_CHECK(n_background >= 1 && n_target >= 1, "sample counts must be >= 1");
    SEPVAE_CHECK(image_height >= 8 && image_width >= 8, "image size too small");
    SEPVAE_CHECK(target_fraction > 0.0 && target_fraction < 1.0,
                 "target_fraction must be in (0,1)");
    SEPVAE_CHECK(n_subtypes >= 1 && n_subtypes <= 4, "n_subtypes must be in 1..4");
    for (const auto* r : {&gradient_angle, &disk_u, &disk_v, &disk_r, &salient_intensity}) {
        SEPVAE_CHECK(r->lo < r->hi, "factor range must satisfy lo < hi");
    }
    SEPVAE_CHECK(salient_side >= 0 && salient_side <= std::min(image_height, image_width) / 2,
                 "salient_side must be in [0, min(height, width) / 2]");
    SEPVAE_CHECK(noise_std >= 0.0, "noise_std must be >= 0");
}

nlohmann::ordered_json DataGenConfig::to_json() const {
    auto range = [](const FactorRange& r) {
        return nlohmann::ordered_json{r.lo, r.hi};
    };
    return nlohmann::ordered_json{
        {"n_background", n_background},
        {"n_target", n_target},
        {"image_height", image_height},
        {"image_width", image_width},
        {"target_fraction", target_fraction},
        {"n_subtypes", n_subtypes},
        {"gradient_angle", range(gradient_angle)},
        {"disk_u", range(disk_u)},
        {"disk_v", range(disk_v)},
        {"disk_r", range(disk_r)},
        {"salient_intensity", range(salient_intensity)},
        {"salient_side", salient_side},
        {"noise_std", noise_std},
        {"seed", seed}};
}

DataGenConfig DataGenConfig::from_json(const nlohmann::json& j) {
    DataGenConfig cfg;
    auto range = [&](const char* key, FactorRange fallback) {
        if (!j.contains(key)) return fallback;
        return FactorRange{j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    cfg.n_background = j.value("n_background", cfg.n_background);
    cfg.n_target = j.value("n_target", cfg.n_target);
    cfg.image_height = j.value("image_height", cfg.image_height);
    cfg.image_width = j.value("image_width", cfg.image_width);
    cfg.target_fraction = j.value("target_fraction", cfg.target_fraction);
    cfg.n_subtypes = j.value("n_subtypes", cfg.n_subtypes);
    cfg.gradient_angle = range("gradient_angle", cfg.gradient_angle);
    cfg.disk_u = range("disk_u", cfg.disk_u);
    cfg.disk_v = range("disk_v", cfg.disk_v);
    cfg.disk_r = range("disk_r", cfg.disk_r);
    cfg.salient_intensity = range("salient_intensity", cfg.salient_intensity);
    cfg.salient_side = j.value("salient_side", cfg.salient_side);
    cfg.noise_std = j.value("noise_std", cfg.noise_std);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json DatasetManifest::to_json() const {
    return nlohmann::ordered_json{
        {"config", config},
        {"config_hash", config_hash},
        {"seed", seed},
        {"splits", nlohmann::ordered_json{{"train", splits.train},
                                          {"val", splits.val},
                                          {"test", splits.test}}},
        {"samples", samples}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.config = j.at("config");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.splits.train = j.at("splits").at("train").get<std::vector<int64_t>>();
    m.splits.val = j.at("splits").at("val").get<std::vector<int64_t>>();
    m.splits.test = j.at("splits").at("test").get<std::vector<int64_t>>();
    m.samples = j.at("samples");
    return m;
}

std::string config_hash_hex(const nlohmann::json& config) {
    // FNV-1a over the canonical dump; stable across platforms.
    const std::string dump = config.dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

struct SampleFactors {
    double theta = 0.0, disk_u = 0.0, disk_v = 0.0, disk_r = 0.0;
    int64_t subtype = -1;
    double intensity = std::numeric_limits<double>::quiet_NaN();
};

// Renders one sample into `img` (H*W floats, row-major), quantized to the
// 8-bit grid so PNG round trips are exact.
void render_sample(const DataGenConfig& cfg, const SampleFactors& f, uint64_t stream_seed,
                   float* img) {
    const int64_t h = cfg.image_height, w = cfg.image_width;
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double ct = std::cos(f.theta), st = std::sin(f.theta);
    // Square side: configurable, defaulting to ~one third of a quadrant box.
    const int64_t side =
        cfg.salient_side > 0 ? cfg.salient_side : std::max<int64_t>(3, h / 5);
    // Quadrant centers in normalized [-1,1] coordinates: 0 TL, 1 TR, 2 BL, 3 BR.
    const double qx = (f.subtype == 0 || f.subtype == 2) ? -0.5 : 0.5;
    const double qy = (f.subtype == 0 || f.subtype == 1) ? -0.5 : 0.5;

    for (int64_t i = 0; i < h; ++i) {
        const double uy = 2.0 * (static_cast<double>(i) + 0.5) / h - 1.0;
        for (int64_t j = 0; j < w; ++j) {
            const double ux = 2.0 * (static_cast<double>(j) + 0.5) / w - 1.0;
            // Common content: linear gradient plus a disk.
            double v = 0.2 + 0.3 * (ux * ct + uy * st + 1.0) / 2.0;
            const double du = ux - f.disk_u, dv = uy - f.disk_v;
            if (du * du + dv * dv <= f.disk_r * f.disk_r) {
                v += 0.3;
            }
            // Salient content: bright square in the subtype's quadrant.
            if (f.subtype >= 0) {
                const double half = static_cast<double>(side) / h;  // normalized half-side
                if (std::abs(ux - qx) <= half && std::abs(uy - qy) <= half) {
                    v = std::max(v, f.intensity);
                }
            }
            if (cfg.noise_std > 0.0) {
                v += cfg.noise_std * noise(rng);
            }
            v = std::clamp(v, 0.0, 1.0);
            img[i * w + j] = static_cast<float>(std::round(v * 255.0) / 255.0);
        }
    }
}

}  // namespace

std::pair<ContrastiveDataset, DatasetManifest> generate_synthetic(const DataGenConfig& config) {
    config.validate();
    const int64_t n = config.n_background + config.n_target;
    const int64_t h = config.image_height, w = config.image_width;

    ContrastiveDataset ds;
    ds.images = torch::empty({n, 1, h, w}, torch::kFloat32);
    ds.labels = torch::empty({n}, torch::kInt64);
    ds.attribute_names = {"theta_cos", "theta_sin", "disk_u", "disk_v", "disk_r"};
    ds.attributes = torch::empty({n, 5}, torch::kFloat64);
    ds.subtype = torch::empty({n}, torch::kInt64);
    ds.salient_factors = torch::full({n, 3}, std::numeric_limits<double>::quiet_NaN(),
                                     torch::kFloat64);

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    auto* img_ptr = ds.images.data_ptr<float>();

    for (int64_t i = 0; i < n; ++i) {
        const bool is_target = i >= config.n_background;
        const uint64_t stream = sample_stream_seed(config.seed, i);
        std::mt19937_64 rng(splitmix64(stream));  // factor stream; pixels use `stream`

        SampleFactors f;
        f.theta = uniform_in(rng, config.gradient_angle);
        f.disk_u = uniform_in(rng, config.disk_u);
        f.disk_v = uniform_in(rng, config.disk_v);
        f.disk_r = uniform_in(rng, config.disk_r);
        if (is_target) {
            const int64_t tg_index = i - config.n_background;
            f.subtype = tg_index % config.n_subtypes;  // balanced within +-1
            f.intensity = uniform_in(rng, config.salient_intensity);
        }

        render_sample(config, f, stream, img_ptr + i * h * w);

        ds.labels[i] = is_target ? 1 : 0;
        ds.attributes[i][0] = std::cos(f.theta);
        ds.attributes[i][1] = std::sin(f.theta);
        ds.attributes[i][2] = f.disk_u;
        ds.attributes[i][3] = f.disk_v;
        ds.attributes[i][4] = f.disk_r;
        ds.subtype[i] = f.subtype;
        if (is_target) {
            // Intensity plus the square's quadrant center, so the true
            // salient factors determine the subtype exactly.
            ds.salient_factors[i][0] = f.intensity;
            ds.salient_factors[i][1] = (f.subtype == 0 || f.subtype == 2) ? -0.5 : 0.5;
            ds.salient_factors[i][2] = (f.subtype == 0 || f.subtype == 1) ? -0.5 : 0.5;
        }

        nlohmann::ordered_json row{
            {"index", i},
            {"y", is_target ? 1 : 0},
            {"theta", f.theta},
            {"disk_u", f.disk_u},
            {"disk_v", f.disk_v},
            {"disk_r", f.disk_r}};
        if (is_target) {
            row["subtype"] = f.subtype;
            row["intensity"] = f.intensity;
        } else {
            row["subtype"] = nullptr;
            row["intensity"] = nullptr;
        }
        rows.push_back(std::move(row));
    }

    DatasetManifest manifest;
    manifest.config = config.to_json();
    manifest.config_hash = config_hash_hex(manifest.config);
    manifest.seed = config.seed;
    manifest.samples = std::move(rows);
    return {std::move(ds), std::move(manifest)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

}  // namespace

ContrastiveDataset load_image_folder(const std::string& root_path,
                                     const std::string& labels_file,
                                     int64_t channels, int64_t height, int64_t width) {
    SEPVAE_CHECK(channels == 1 || channels == 3, "channels must be 1 or 3");
    std::ifstream in(labels_file);
    if (!in.good()) {
        throw std::runtime_error("cannot open labels file: " + labels_file);
    }

    std::string line;
    SEPVAE_CHECK(static_cast<bool>(std::getline(in, line)), "labels file is empty");
    auto header = split_csv_line(line);
    SEPVAE_CHECK(header.size() >= 2 && header[0] == "filename" && header[1] == "y",
                 "labels header must start with filename,y");

    int subtype_col = -1;
    std::vector<std::string> attr_names;
    std::vector<int> attr_cols;
    for (size_t c = 2; c < header.size(); ++c) {
        if (header[c] == "subtype") {
            subtype_col = static_cast<int>(c);
        } else {
            attr_names.push_back(header[c]);
            attr_cols.push_back(static_cast<int>(c));
        }
    }

    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels, subtypes;
    std::vector<double> attr_values;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 2) {
            throw std::runtime_error("unparseable labels row at line " +
                                     std::to_string(line_no));
        }
        const std::string path = (fs::path(root_path) / "images" / fields[0]).string();
        cv::Mat raw = cv::imread(path, channels == 1 ? cv::IMREAD_GRAYSCALE
                                                     : cv::IMREAD_COLOR);
        if (raw.empty()) {
            throw std::runtime_error("cannot load image referenced by labels.csv: " + path);
        }
        if (raw.rows != height || raw.cols != width) {
            cv::resize(raw, raw, cv::Size(static_cast<int>(width), static_cast<int>(height)),
                       0, 0, cv::INTER_AREA);
        }
        if (channels == 3) {
            cv::cvtColor(raw, raw, cv::COLOR_BGR2RGB);
        }
        // k / 255.0 in double, then down to float: bit-identical to the
        // quantization applied at generation time.
        auto t8 = torch::from_blob(raw.data, {height, width, channels}, torch::kUInt8);
        auto t = (t8.to(torch::kFloat64) / 255.0)
                     .to(torch::kFloat32)
                     .permute({2, 0, 1})
                     .clone();
        images.push_back(std::move(t));

        try {
            labels.push_back(std::stoll(fields[1]));
        } catch (const std::exception&) {
            throw std::runtime_error("unparseable y at line " + std::to_string(line_no));
        }
        int64_t st = -1;
        if (subtype_col >= 0 && static_cast<size_t>(subtype_col) < fields.size() &&
            !fields[subtype_col].empty()) {
            st = std::stoll(fields[subtype_col]);
        }
        subtypes.push_back(st);
        for (int c : attr_cols) {
            if (static_cast<size_t>(c) < fields.size() && !fields[c].empty()) {
                attr_values.push_back(std::stod(fields[c]));
            } else {
                attr_values.push_back(nan);
            }
        }
    }

    ContrastiveDataset ds;
    const auto n = static_cast<int64_t>(images.size());
    SEPVAE_CHECK(n > 0, "labels file lists no samples");
    ds.images = torch::stack(images);
    ds.labels = torch::tensor(labels, torch::kInt64);
    ds.subtype = torch::tensor(subtypes, torch::kInt64);
    ds.attribute_names = attr_names;
    if (!attr_names.empty()) {
        ds.attributes = torch::tensor(attr_values, torch::kFloat64)
                            .reshape({n, static_cast<int64_t>(attr_names.size())});
    } else {
        ds.attributes = torch::empty({n, 0}, torch::kFloat64);
    }
    ds.salient_factors = torch::empty({n, 0}, torch::kFloat64);
    return ds;
}

void save_dataset_folder(const ContrastiveDataset& dataset, const DatasetManifest& manifest,
                         const std::string& root_path) {
    const fs::path root(root_path);
    fs::create_directories(root / "images");

    const int64_t n = dataset.size();
    const int64_t c = dataset.images.size(1);
    const int64_t h = dataset.images.size(2);
    const int64_t w = dataset.images.size(3);
    SEPVAE_CHECK(c == 1 || c == 3, "only 1- or 3-channel images supported");

    std::ofstream csv(root / "labels.csv");
    csv << "filename,y,subtype";
    for (const auto& name : dataset.attribute_names) {
        csv << "," << name;
    }
    csv << "\n";

    auto u8 = (dataset.images * 255.0f).round().clamp(0, 255).to(torch::kUInt8);
    for (int64_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(i));
        cv::Mat mat;
        if (c == 1) {
            mat = cv::Mat(static_cast<int>(h), static_cast<int>(w), CV_8UC1,
                          u8[i][0].data_ptr<uint8_t>())
                      .clone();
        } else {
            auto hwc = u8[i].permute({1, 2, 0}).contiguous();
            mat = cv::Mat(static_cast<int>(h), static_cast<int>(w), CV_8UC3,
                          hwc.data_ptr<uint8_t>())
                      .clone();
            cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
        }
        cv::imwrite((root / "images" / name).string(), mat);

        csv << name << "," << dataset.labels[i].item<int64_t>();
        const int64_t st = dataset.subtype[i].item<int64_t>();
        csv << ",";
        if (st >= 0) csv << st;
        for (int64_t k = 0; k < dataset.attributes.size(1); ++k) {
            const double v = dataset.attributes[i][k].item<double>();
            csv << ",";
            if (!std::isnan(v)) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                csv << buf;
            }
        }
        csv << "\n";
    }

    std::ofstream mf(root / "manifest.json");
    mf << manifest.to_json().dump(2) << "\n";
}

SplitIndices split(const ContrastiveDataset& dataset, double train_fraction,
                   double val_fraction, double test_fraction, uint64_t seed,
                   bool stratify_on_y) {
    SEPVAE_CHECK(dataset.size() >= 3, "dataset must hold at least 3 samples");
    SEPVAE_CHECK(train_fraction >= 0 && val_fraction >= 0 && test_fraction >= 0,
                 "fractions must be non-negative");
    SEPVAE_CHECK(std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9,
                 "fractions must sum to 1");

    std::vector<std::vector<int64_t>> groups;
    if (stratify_on_y) {
        groups.resize(2);
        for (int64_t i = 0; i < dataset.size(); ++i) {
            groups[dataset.labels[i].item<int64_t>()].push_back(i);
        }
    } else {
        groups.emplace_back(dataset.size());
        std::iota(groups.back().begin(), groups.back().end(), 0);
    }

    SplitIndices out;
    std::mt19937_64 rng(splitmix64(seed));
    for (auto& g : groups) {
        if (g.empty()) continue;
        std::shuffle(g.begin(), g.end(), rng);
        const auto n = static_cast<int64_t>(g.size());
        auto n_train = static_cast<int64_t>(std::llround(train_fraction * n));
        auto n_val = static_cast<int64_t>(std::llround(val_fraction * n));
        n_train = std::min(n_train, n);
        n_val = std::min(n_val, n - n_train);
        out.train.insert(out.train.end(), g.begin(), g.begin() + n_train);
        out.val.insert(out.val.end(), g.begin() + n_train, g.begin() + n_train + n_val);
        out.test.insert(out.test.end(), g.begin() + n_train + n_val, g.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace sepvae
