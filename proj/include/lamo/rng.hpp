#pragma once

#include <cstdint>

namespace lamo {

// Counter-based deterministic RNG. Every draw is a pure hash of
// (seed, stream_id, counter), so equal (seed, stream_id) reproduce the same
// sequence on any platform, and substreams derived for parallel work are
// independent of evaluation order. Single-owner: do not share one stream
// across threads; hand each worker its own substream instead.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::uint64_t counter = 0;

    RngStream() = default;
    explicit RngStream(std::uint64_t seed_, std::uint64_t stream_id_ = 0)
        : seed(seed_), stream_id(stream_id_) {}

    std::uint64_t next_u64();

    // uniform in [0,1), 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);

    // standard normal via Box-Muller; second value of each pair is cached
    double normal();

    // uniform integer in [0, n), n >= 1
    std::uint64_t next_below(std::uint64_t n);

    bool bernoulli(double p);

    // Independent stream derived from this stream's identity (not its
    // position); calling order does not affect substream contents.
    RngStream substream(std::uint64_t id) const;

  private:
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lamo
