#pragma once

// Counter-based random streams. Every Monte Carlo trial owns a stream keyed
// by (seed, trial_index), so results do not depend on scheduling.

#include <array>
#include <cmath>
#include <cstdint>

namespace relaylab {

/// Philox4x64-10 block function (Salmon et al., SC'11).
class Philox4x64 {
public:
    using Block = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;

    static Block generate(Block ctr, Key key)
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

    static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo)
    {
        const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
        hi = static_cast<std::uint64_t>(p >> 64);
        lo = static_cast<std::uint64_t>(p);
    }

    static Block single_round(const Block& c, const Key& k)
    {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Draw sequence that is a pure function of (seed, trial_index).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t trial_index) : seed_(seed), trial_(trial_index) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t trial_index() const noexcept { return trial_; }

    std::uint64_t next_u64()
    {
        if (pos_ == 4) {
            buf_ = Philox4x64::generate({block_++, trial_, 0, 0}, {seed_, kStreamTag});
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform on (0, 1], 53-bit resolution; never 0 so -log(u) is finite.
    double uniform_open0()
    {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double exponential(double mean) { return -mean * std::log(uniform_open0()); }

private:
    static constexpr std::uint64_t kStreamTag = 0x9E3779B97F4A7C15ULL;

    std::uint64_t seed_;
    std::uint64_t trial_;
    std::uint64_t block_ = 0;
    Philox4x64::Block buf_{};
    int pos_ = 4;
};

} // namespace relaylab
