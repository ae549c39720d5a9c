#pragma once

#include <string>

#include "lamo/denoiser.hpp"
#include "lamo/fieldnet.hpp"

namespace lamo {

// Checkpoint directory: manifest.json (kind, architecture sizes, tensor
// names + shapes) plus one LMT1 file per named parameter. Round-trips are
// bit-exact.
void save_fieldnet(const FieldNet& net, const std::string& dir);
FieldNet load_fieldnet(const std::string& dir);

void save_denoiser(const Denoiser& net, const std::string& dir);
Denoiser load_denoiser(const std::string& dir);

}  // namespace lamo
