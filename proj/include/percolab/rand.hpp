#pragma once

#include <cstdint>
#include <string_view>

namespace percolab {

// Counter-based deterministic randomness. Every random quantity in the
// library is a pure function of (experiment seed, sample index, stream
// domain, object key), so samples can be regenerated bit-exactly and
// evaluated in any order. No std::hash anywhere: layouts must match
// across platforms.

// 64-bit finalizer (murmur3 variant). Not cryptographic; statistical
// independence across distinct inputs is all that is required here.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

// FNV-1a over bytes; used to key streams by canonical strings.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// prf64(seed, sample, domain, key): the single source of randomness.
constexpr std::uint64_t prf64(std::uint64_t seed, std::uint64_t sample,
                              std::uint64_t domain_hash, std::uint64_t key_hash) noexcept {
    std::uint64_t h = mix64(seed ^ domain_hash);
    h = mix64(h ^ (sample * kGolden));
    h = mix64(h ^ key_hash);
    return h;
}

constexpr std::uint64_t prf64(std::uint64_t seed, std::uint64_t sample,
                              std::string_view domain, std::uint64_t key_hash) noexcept {
    return prf64(seed, sample, fnv1a(domain), key_hash);
}

// Uniform double in [0, 1), 53 significant bits.
constexpr double u01(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) without modulo bias worth worrying about at
// the n <= 64 fan-outs used here (floor of u01 * n is exact for such n).
constexpr int uniform_index(std::uint64_t h, int n) noexcept {
    int k = static_cast<int>(u01(h) * n);
    return k >= n ? n - 1 : k;
}

// Identifies one sample of one experiment; extended with stream domains
// at the point of use.
struct CouplingSeed {
    std::uint64_t experiment = 0;
    std::uint64_t sample = 0;
};

// Derived seed for the k-th point of a sweep.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return mix64(base ^ (index * kGolden) ^ 0x5bd1e995ULL);
}

} // namespace percolab
