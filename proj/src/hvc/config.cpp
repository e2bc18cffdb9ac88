#include "hvc/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hvc/io.hpp"

namespace hvc {

using nlohmann::json;

void ModelConfig::validate() const {
    check(scales.size() >= 2, ErrorKind::Config, "model needs at least 2 scales");
    for (size_t i = 0; i < scales.size(); ++i) {
        const ScaleSpec& s = scales[i];
        check(s.downsample_factor >= 1 && s.channels >= 1 && s.latent_channels >= 1,
              ErrorKind::Config, "bad scale spec at index " + std::to_string(i));
        if (i > 0) {
            check(s.downsample_factor <= scales[i - 1].downsample_factor, ErrorKind::Config,
                  "scale factors must be non-increasing coarse->fine");
            check(scales[i - 1].downsample_factor % s.downsample_factor == 0, ErrorKind::Config,
                  "each scale factor must divide the previous one");
        }
    }
    check(temporal_context_len == 2, ErrorKind::Config, "temporal_context_len must be 2");
    check(res_blocks >= 1 && res_blocks <= 8, ErrorKind::Config, "res_blocks out of range");
}

namespace {

json scales_to_json(const std::vector<ScaleSpec>& scales) {
    json a = json::array();
    for (const ScaleSpec& s : scales) {
        a.push_back({{"factor", s.downsample_factor},
                     {"channels", s.channels},
                     {"latent_channels", s.latent_channels}});
    }
    return a;
}

} // namespace

std::string ModelConfig::to_json() const {
    json j;
    j["scales"] = scales_to_json(scales);
    j["temporal_prediction"] = temporal_prediction;
    j["decoding_fusion"] = decoding_fusion;
    j["temporal_context_len"] = temporal_context_len;
    j["res_blocks"] = res_blocks;
    j["precision"] = dtype_name(precision);
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, std::string("config parse error: ") + e.what());
    }
    ModelConfig c;
    try {
        for (const json& s : j.at("scales")) {
            ScaleSpec sp;
            sp.downsample_factor = s.at("factor").get<int64_t>();
            sp.channels = s.at("channels").get<int64_t>();
            sp.latent_channels = s.at("latent_channels").get<int64_t>();
            c.scales.push_back(sp);
        }
        c.temporal_prediction = j.value("temporal_prediction", true);
        c.decoding_fusion = j.value("decoding_fusion", true);
        c.temporal_context_len = j.value("temporal_context_len", 2);
        c.res_blocks = j.value("res_blocks", 2);
        std::string prec = j.value("precision", "f32");
        check(prec == "f32" || prec == "f64", ErrorKind::Config,
              "precision must be f32 or f64, got " + prec);
        c.precision = prec == "f64" ? Dtype::F64 : Dtype::F32;
    } catch (const json::exception& e) {
        fail(ErrorKind::Io, std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

uint64_t ModelConfig::canonical_hash() const {
    // Canonical form: compact JSON with sorted keys over the fields that
    // decode depends on. nlohmann::json orders keys lexicographically.
    json j;
    j["decoding_fusion"] = decoding_fusion;
    j["precision"] = dtype_name(precision);
    j["res_blocks"] = res_blocks;
    j["scales"] = scales_to_json(scales);
    j["temporal_context_len"] = temporal_context_len;
    j["temporal_prediction"] = temporal_prediction;
    return fnv1a64(j.dump());
}

ModelConfig ModelConfig::paper_shape() {
    ModelConfig c;
    c.scales = {{64, 192, 16}, {32, 192, 16}, {16, 192, 16}, {16, 192, 16}, {8, 192, 16}};
    c.res_blocks = 2;
    return c;
}

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.scales = {{16, 48, 8}, {8, 48, 8}, {4, 48, 8}, {2, 48, 8}};
    c.res_blocks = 2;
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.scales = {{8, 24, 4}, {4, 24, 4}, {2, 24, 4}};
    c.res_blocks = 1;
    return c;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), ErrorKind::Io, "cannot open config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ModelConfig::from_json(ss.str());
}

void save_model_config(const std::string& path, const ModelConfig& cfg) {
    std::ofstream f(path, std::ios::trunc);
    check(f.good(), ErrorKind::Io, "cannot create config " + path);
    f << cfg.to_json() << "\n";
    check(f.good(), ErrorKind::Io, "write failed: " + path);
}

} // namespace hvc
