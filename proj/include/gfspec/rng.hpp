#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace gfspec {

/// Philox4x32-10 block: a keyed bijection on 128-bit counters.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key)
    {
        constexpr std::uint32_t mul0 = 0xD2511F53u;
        constexpr std::uint32_t mul1 = 0xCD9E8D57u;
        constexpr std::uint32_t bump0 = 0x9E3779B9u;
        constexpr std::uint32_t bump1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{mul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{mul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += bump0;
            key[1] += bump1;
        }
        return ctr;
    }
};

/// Deterministic random stream addressed by (seed, stream id). Draw n of stream s
/// is a pure function of (seed, s, n), so paths can be farmed out to any number of
/// workers without changing a single bit of the output.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64()
    {
        if (used_ >= 2) refill();
        const std::uint64_t v = (std::uint64_t{buffer_[2 * used_]} << 32) | buffer_[2 * used_ + 1];
        ++used_;
        return v;
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t blocks_used() const { return counter_; }

private:
    void refill()
    {
        const Philox4x32::Block ctr = {static_cast<std::uint32_t>(counter_),
                                       static_cast<std::uint32_t>(counter_ >> 32),
                                       static_cast<std::uint32_t>(stream_),
                                       static_cast<std::uint32_t>(stream_ >> 32)};
        const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                                     static_cast<std::uint32_t>(seed_ >> 32)};
        buffer_ = Philox4x32::generate(ctr, key);
        ++counter_;
        used_ = 0;
    }

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    Philox4x32::Block buffer_{};
    int used_ = 2;
};

}  // namespace gfspec
