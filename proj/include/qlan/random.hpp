#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qlan {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Stable sub-seed for a named component, e.g. derive_seed(master, "link/A-B/HD").
std::uint64_t derive_seed(std::uint64_t master, std::string_view component) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) noexcept;

/// Worker cap from QLAN_THREADS, defaulting to the hardware concurrency.
unsigned worker_count() noexcept;

}  // namespace qlan
