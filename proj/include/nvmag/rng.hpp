// rng.hpp: named random stream derivation.
//
// Every random draw in the library comes from a stream derived from
// (root seed, purpose, index), so results do not depend on how work is
// split across threads.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nvmag {

using Rng = std::mt19937_64;

std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0) {
    return Rng(derive_seed(root, purpose, index));
}

}  // namespace nvmag
