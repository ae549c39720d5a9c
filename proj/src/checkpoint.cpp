#include "lamo/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lamo/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lamo {

namespace {

std::string tensor_file(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "param_%03zu.lmt", index);
    return buf;
}

void save_params(const std::vector<const Tensor*>& params,
                 const std::vector<std::string>& names, json& manifest,
                 const std::string& dir) {
    json tensors = json::array();
    for (std::size_t k = 0; k < params.size(); ++k) {
        write_tensor(*params[k], (fs::path(dir) / tensor_file(k)).string());
        tensors.push_back({{"name", names[k]},
                           {"shape", params[k]->shape},
                           {"file", tensor_file(k)}});
    }
    manifest["tensors"] = std::move(tensors);
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("checkpoint: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

json load_manifest(const std::string& dir, const std::string& kind) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("checkpoint: no manifest in " + dir);
    json manifest = json::parse(f);
    if (manifest.value("kind", "") != kind) {
        throw std::runtime_error("checkpoint: " + dir + " is not a " + kind + " checkpoint");
    }
    return manifest;
}

void load_params(const json& manifest, const std::vector<Tensor*>& params,
                 const std::vector<std::string>& names, const std::string& dir) {
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size()) {
        throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) +
                                 " tensors, manifest lists " + std::to_string(tensors.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& entry = tensors[k];
        if (entry.at("name") != names[k]) {
            throw std::runtime_error("checkpoint: tensor order mismatch at " + names[k]);
        }
        Tensor t = read_tensor((fs::path(dir) / entry.at("file").get<std::string>()).string());
        if (t.shape != params[k]->shape) {
            throw std::runtime_error("checkpoint: shape mismatch for " + names[k]);
        }
        *params[k] = std::move(t);
    }
}

}  // namespace

void save_fieldnet(const FieldNet& net, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["kind"] = "fieldnet";
    manifest["channels"] = net.cfg.channels;
    manifest["cond_dim"] = net.cfg.cond_dim;
    manifest["blocks"] = net.cfg.blocks;
    manifest["width"] = net.cfg.width;
    save_params(net.params(), net.param_names(), manifest, dir);
}

FieldNet load_fieldnet(const std::string& dir) {
    json manifest = load_manifest(dir, "fieldnet");
    FieldNetConfig cfg;
    cfg.channels = manifest.at("channels");
    cfg.cond_dim = manifest.at("cond_dim");
    cfg.blocks = manifest.at("blocks");
    cfg.width = manifest.at("width");
    RngStream dummy(0);
    FieldNet net = init_fieldnet(cfg, dummy);
    load_params(manifest, net.params(), net.param_names(), dir);
    return net;
}

void save_denoiser(const Denoiser& net, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["kind"] = "denoiser";
    manifest["channels"] = net.cfg.channels;
    manifest["cond_dim"] = net.cfg.cond_dim;
    manifest["width"] = net.cfg.width;
    manifest["spatial_blocks"] = net.cfg.spatial_blocks;
    manifest["temporal_mixes"] = net.cfg.temporal_mixes;
    manifest["emb_dim"] = net.cfg.emb_dim;
    manifest["parameterization"] = to_string(net.cfg.param);
    save_params(net.params(), net.param_names(), manifest, dir);
}

Denoiser load_denoiser(const std::string& dir) {
    json manifest = load_manifest(dir, "denoiser");
    DenoiserConfig cfg;
    cfg.channels = manifest.at("channels");
    cfg.cond_dim = manifest.at("cond_dim");
    cfg.width = manifest.at("width");
    cfg.spatial_blocks = manifest.at("spatial_blocks");
    cfg.temporal_mixes = manifest.at("temporal_mixes");
    cfg.emb_dim = manifest.at("emb_dim");
    cfg.param = parameterization_from(manifest.at("parameterization"));
    RngStream dummy(0);
    Denoiser net = init_denoiser(cfg, dummy);
    load_params(manifest, net.params(), net.param_names(), dir);
    return net;
}

}  // namespace lamo
