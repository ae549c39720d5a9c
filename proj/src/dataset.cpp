#include "lamo/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lamo/tensor_io.hpp"

namespace fs = std::filesystem;

namespace lamo {

namespace {

std::string clip_stem(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04zu", k);
    return buf;
}

// hex-exact doubles so the meta round-trips bit for bit
std::string f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

}  // namespace

std::string encode_scene_meta(const SceneConfig& s, const Conditioning& cond) {
    std::ostringstream os;
    os << "t_frames " << s.t_frames << "\n";
    os << "channels " << s.channels << "\n";
    os << "height " << s.height << "\n";
    os << "width " << s.width << "\n";
    os << "n_blobs " << s.n_blobs << "\n";
    for (std::size_t b = 0; b < s.n_blobs; ++b) {
        os << "pos_y_" << b << " " << f64(s.pos_y[b]) << "\n";
        os << "pos_x_" << b << " " << f64(s.pos_x[b]) << "\n";
        os << "vel_y_" << b << " " << f64(s.vel_y[b]) << "\n";
        os << "vel_x_" << b << " " << f64(s.vel_x[b]) << "\n";
        os << "radius_" << b << " " << f64(s.radius[b]) << "\n";
    }
    for (std::size_t i = 0; i < s.channel_mix.size(); ++i) {
        os << "mix_" << i << " " << f64(s.channel_mix[i]) << "\n";
    }
    for (std::size_t i = 0; i < cond.size(); ++i) {
        os << "cond_" << i << " " << f64(cond[i]) << "\n";
    }
    return os.str();
}

void decode_scene_meta(const std::string& text, SceneConfig& scene, Conditioning& cond) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string key, value;
    while (is >> key >> value) kv[key] = value;
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::runtime_error("scene meta: missing key " + k);
        return it->second;
    };
    auto getd = [&](const std::string& k) { return std::strtod(get(k).c_str(), nullptr); };
    scene = SceneConfig{};
    scene.t_frames = std::stoull(get("t_frames"));
    scene.channels = std::stoull(get("channels"));
    scene.height = std::stoull(get("height"));
    scene.width = std::stoull(get("width"));
    scene.n_blobs = std::stoull(get("n_blobs"));
    for (std::size_t b = 0; b < scene.n_blobs; ++b) {
        scene.pos_y.push_back(getd("pos_y_" + std::to_string(b)));
        scene.pos_x.push_back(getd("pos_x_" + std::to_string(b)));
        scene.vel_y.push_back(getd("vel_y_" + std::to_string(b)));
        scene.vel_x.push_back(getd("vel_x_" + std::to_string(b)));
        scene.radius.push_back(getd("radius_" + std::to_string(b)));
    }
    scene.channel_mix.resize(scene.channels * scene.n_blobs);
    for (std::size_t i = 0; i < scene.channel_mix.size(); ++i) {
        scene.channel_mix[i] = getd("mix_" + std::to_string(i));
    }
    cond.assign(kCondDim, 0.0);
    for (std::size_t i = 0; i < kCondDim; ++i) {
        cond[i] = getd("cond_" + std::to_string(i));
    }
}

void write_dataset(const std::vector<VideoLatent>& clips, const std::string& dir) {
    if (clips.empty()) throw std::invalid_argument("write_dataset: no clips");
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "lamo-dataset 1\n";
    manifest << "count " << clips.size() << "\n";
    manifest << "t_frames " << clips[0].z.dim(0) << "\n";
    manifest << "channels " << clips[0].z.dim(1) << "\n";
    manifest << "height " << clips[0].z.dim(2) << "\n";
    manifest << "width " << clips[0].z.dim(3) << "\n";
    for (std::size_t k = 0; k < clips.size(); ++k) {
        std::string stem = clip_stem(k);
        write_tensor(clips[k].z, (fs::path(dir) / (stem + ".lmt")).string());
        std::ofstream meta(fs::path(dir) / (stem + ".meta"));
        if (!meta) throw std::runtime_error("write_dataset: cannot write meta for " + stem);
        meta << encode_scene_meta(clips[k].scene, clips[k].cond);
        manifest << "clip " << stem << "\n";
    }
    std::ofstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("write_dataset: cannot write manifest in " + dir);
    mf << manifest.str();
}

std::vector<VideoLatent> read_dataset(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("read_dataset: no manifest in " + dir);
    std::string tag;
    int version = 0;
    mf >> tag >> version;
    if (tag != "lamo-dataset" || version != 1) {
        throw std::runtime_error("read_dataset: unrecognized manifest in " + dir);
    }
    std::vector<VideoLatent> clips;
    std::string key;
    while (mf >> key) {
        std::string value;
        mf >> value;
        if (key != "clip") continue;
        VideoLatent clip;
        clip.z = read_tensor((fs::path(dir) / (value + ".lmt")).string());
        std::ifstream meta(fs::path(dir) / (value + ".meta"));
        if (!meta) throw std::runtime_error("read_dataset: missing meta for " + value);
        std::string text((std::istreambuf_iterator<char>(meta)),
                         std::istreambuf_iterator<char>());
        decode_scene_meta(text, clip.scene, clip.cond);
        clips.push_back(std::move(clip));
    }
    if (clips.empty()) throw std::runtime_error("read_dataset: manifest lists no clips");
    return clips;
}

}  // namespace lamo
