#pragma once

#include <string>

#include "lamo/tensor.hpp"

namespace lamo {

// LMT1 tensor file layout (little-endian):
//
//   magic   "LMT1"          4 bytes
//   version u32 = 1         4 bytes
//   ndim    u8              1 byte
//   dims    ndim * u64
//   data    product(dims) * f64, row-major
//
// Total size = 9 + 8*ndim + 8*product(dims) bytes. Values must be finite.

void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

// In-memory equivalents; file variants are thin wrappers around these.
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace lamo
