/**
 * Philox4x32-10 counter-based generator.
 *
 * The 64-bit seed is the key; the 128-bit counter is split into a 64-bit
 * stream id and a 64-bit block index, so independent substreams are just
 * different stream ids. Satisfies UniformRandomBitGenerator.
 */
#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace jcov {

class Philox4x32 {
public:
    using result_type = std::uint32_t;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

    result_type operator()() noexcept {
        if (pos_ == 4) {
            buffer_ = block({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                            key_);
            ++block_;
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    void discard(unsigned long long z) noexcept {
        for (; z; --z) (*this)();
    }

    /// Raw bijection: ten rounds over (counter, key).
    static constexpr std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                                        std::array<std::uint32_t, 2> key) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int pos_ = 4;
};

/// Stream id for (trial, slot). Slots index groups or named purposes.
constexpr std::uint64_t stream_id(std::uint64_t trial, std::uint32_t slot) noexcept { return (trial << 32) | slot; }

/// Reserved slots for draws that are not per-group sample data.
namespace slot {
inline constexpr std::uint32_t scenario = 0xFFFF0000u;
inline constexpr std::uint32_t dgp = 0xFFFF0001u;
}  // namespace slot

inline Philox4x32 substream(std::uint64_t seed, std::uint64_t trial, std::uint32_t slot) {
    return Philox4x32(seed, stream_id(trial, slot));
}

}  // namespace jcov
