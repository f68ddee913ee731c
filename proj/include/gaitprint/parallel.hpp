#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

namespace gaitprint {

/// Number of worker threads to use. `requested` <= 0 means "all hardware
/// threads"; the GAITPRINT_JOBS environment variable caps the result.
int resolve_jobs(int requested);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index runs
/// exactly once; the first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

/// SplitMix64 finalizer, used to derive independent RNG substreams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// 64-bit FNV-1a of a byte string. Stable across platforms.
std::uint64_t fnv1a(std::string_view bytes);

} // namespace gaitprint
