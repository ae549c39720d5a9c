#include "lamo/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lamo {

static_assert(std::endian::native == std::endian::little,
              "LMT1 writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'M', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append_raw(std::string& buf, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
}

template <typename T>
T read_raw(const std::string& buf, std::size_t& off) {
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
    std::size_t bad = first_non_finite(t);
    if (bad != t.size()) {
        throw std::invalid_argument("write_tensor: non-finite value at flat index " +
                                    std::to_string(bad));
    }
    if (t.shape.size() > 255) {
        throw std::invalid_argument("write_tensor: rank exceeds 255");
    }
    std::string buf;
    buf.reserve(9 + 8 * t.shape.size() + 8 * t.size());
    buf.append(kMagic, 4);
    append_raw(buf, kVersion);
    buf.push_back(static_cast<char>(t.shape.size()));
    for (std::size_t d : t.shape) append_raw(buf, static_cast<std::uint64_t>(d));
    buf.append(reinterpret_cast<const char*>(t.data.data()), 8 * t.size());
    return buf;
}

Tensor decode_tensor(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw std::runtime_error(origin + ": not an LMT1 file");
    }
    std::size_t off = 4;
    std::uint32_t version = read_raw<std::uint32_t>(bytes, off);
    if (version != kVersion) {
        throw std::runtime_error(origin + ": unsupported LMT1 version " + std::to_string(version));
    }
    std::size_t ndim = static_cast<unsigned char>(bytes[off++]);
    if (bytes.size() < off + 8 * ndim) {
        throw std::runtime_error(origin + ": truncated tensor");
    }
    std::vector<std::size_t> shape(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        shape[i] = static_cast<std::size_t>(read_raw<std::uint64_t>(bytes, off));
    }
    std::size_t count = shape_product(shape);
    if (bytes.size() != off + 8 * count) {
        throw std::runtime_error(origin + ": truncated tensor");
    }
    Tensor t = Tensor::zeros(std::move(shape));
    std::memcpy(t.data.data(), bytes.data() + off, 8 * count);
    return t;
}

void write_tensor(const Tensor& t, const std::string& path) {
    std::string buf = encode_tensor(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_tensor: cannot open " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write_tensor: write failed for " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_tensor: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes, path);
}

}  // namespace lamo
