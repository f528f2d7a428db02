#pragma once

// Seed derivation and a fixed-size worker pool over indexed work items.
// Results are written by index, so output never depends on the schedule.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>

namespace qrc {

/// Mixes a list of 64-bit words into one seed (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words);

/// Number of workers from QRC_WORKERS, or 1 if unset or invalid.
int default_workers();

/// Calls body(i) for i in [0, count) on `workers` threads. The first
/// exception thrown by any item is rethrown after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace qrc
