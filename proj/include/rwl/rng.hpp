#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rwl {

using Rng = std::mt19937_64;

/// Independent generator derived from a root seed and a stream name
/// ("init", "dropout", "attack", "split", ...). Same (seed, name) always
/// yields the same sequence; different names give unrelated sequences.
Rng make_stream(std::uint64_t root_seed, std::string_view name);

} // namespace rwl
