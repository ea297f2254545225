#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>

namespace spurious_lens {

inline constexpr const char* kThreadsEnvVar = "SPURIOUS_LENS_THREADS";

// Fixed chunk size for seeded Monte-Carlo work. Sub-seeds depend on the chunk
// index only, never on the worker count.
inline constexpr std::size_t kSampleChunk = 4096;

// splitmix64 finalizer over (seed, stream); used for every derived seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream);

// Reads SPURIOUS_LENS_THREADS (0 or unset = hardware concurrency) unless an
// override is active.
std::size_t worker_count();
void set_worker_count_override(std::optional<std::size_t> workers);

// Runs body(chunk) for chunk in [0, num_chunks). Bodies must write only to
// per-chunk state; the caller reduces in chunk order.
void parallel_for_chunks(std::size_t num_chunks,
                         const std::function<void(std::size_t)>& body);

}  // namespace spurious_lens
