#pragma once

#include <string>
#include <vector>

#include "lamo/scenegen.hpp"

namespace lamo {

// Dataset directory layout:
//   manifest.txt         "lamo-dataset 1", count, geometry, clip stems
//   clip_0000.lmt        [T,C,H,W] tensor per clip
//   clip_0000.meta       plain-text key-value scene parameters + conditioning
void write_dataset(const std::vector<VideoLatent>& clips, const std::string& dir);
std::vector<VideoLatent> read_dataset(const std::string& dir);

std::string encode_scene_meta(const SceneConfig& scene, const Conditioning& cond);
void decode_scene_meta(const std::string& text, SceneConfig& scene, Conditioning& cond);

}  // namespace lamo
