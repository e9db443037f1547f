#pragma once

#include <cstdint>
#include <string_view>

namespace mapai {

// Counter-based splittable random streams. A stream is addressed by
// (master_seed, domain_tag, index); deriving a stream is a pure hash, so
// record i of a batch can be generated on any worker in any order and
// still produce identical bytes.

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer (Stafford mix 13 variant).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

// FNV-1a over a string, used to turn domain names into tags.
inline constexpr std::uint64_t tag64(std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                           std::uint64_t domain_tag,
                                           std::uint64_t index) {
    std::uint64_t h = mix64(master_seed + kGolden64);
    h = mix64(h ^ (domain_tag + kGolden64));
    h = mix64(h ^ (index + kGolden64));
    return h;
}

// Sequential generator over a derived seed (SplitMix64).
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kGolden64;
        return mix64(state_);
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be nonzero; bias is < n / 2^64.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_ = 0;
};

inline RngStream substream(std::uint64_t master_seed, std::uint64_t domain_tag,
                           std::uint64_t index) {
    return RngStream(derive_seed(master_seed, domain_tag, index));
}

inline RngStream substream(std::uint64_t master_seed, std::string_view domain,
                           std::uint64_t index) {
    return substream(master_seed, tag64(domain), index);
}

}  // namespace mapai
