#include "lamo/rng.hpp"

#include <cmath>

namespace lamo {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

}  // namespace

std::uint64_t RngStream::next_u64() {
    std::uint64_t word = mix64(seed + kGolden * (stream_id + 1)) + kGolden * (++counter);
    return mix64(word);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so log is finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    // multiply-shift map of a 64-bit draw onto [0,n); bias is O(n/2^64)
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

RngStream RngStream::substream(std::uint64_t id) const {
    RngStream s;
    s.seed = mix64(seed ^ mix64(id + kGolden));
    s.stream_id = mix64(stream_id + kGolden * (id + 1));
    return s;
}

}  // namespace lamo
