#ifndef POPDYN_HASH_HPP
#define POPDYN_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace popdyn {

// FNV-1a, 64-bit. Stable across platforms (std::hash is not), which matters
// for tag bucketing and config fingerprints that end up in output files.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

}  // namespace popdyn

#endif  // POPDYN_HASH_HPP
