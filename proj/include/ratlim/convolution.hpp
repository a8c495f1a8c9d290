#pragma once

// Pull-form convolution steps. Every output entry is a fixed-order sum over its
// sources, so the serial and OpenMP versions produce bit-identical results.

#include <cstdint>
#include <type_traits>
#include <utility>
#include <vector>

namespace ratlim::conv {

template <class S>
inline constexpr bool parallel_capable = std::is_floating_point_v<S>;

// out[i] = sum_g weight[g] * in[source[g][i]] for i < active; source -1 means none.
template <class S>
struct GatherTable {
  std::vector<std::vector<std::int64_t>> source;
  std::vector<S> weight;
};

template <class S>
inline S gather_one(const GatherTable<S>& t, const S* in, std::int64_t i, std::int64_t in_active) {
  S acc(0);
  for (std::size_t g = 0; g < t.weight.size(); ++g) {
    std::int64_t s = t.source[g][static_cast<std::size_t>(i)];
    if (s >= 0 && s < in_active) acc += t.weight[g] * in[s];
  }
  return acc;
}

template <class S>
void gather_step_serial(const GatherTable<S>& t, const S* in, std::int64_t in_active, S* out,
                        std::int64_t out_active) {
  for (std::int64_t i = 0; i < out_active; ++i) out[i] = gather_one(t, in, i, in_active);
}

template <class S>
void gather_step_parallel(const GatherTable<S>& t, const S* in, std::int64_t in_active, S* out,
                          std::int64_t out_active) {
  if constexpr (parallel_capable<S>) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < out_active; ++i) out[i] = gather_one(t, in, i, in_active);
  } else {
    gather_step_serial(t, in, in_active, out, out_active);
  }
}

// Banded chain on {0, 1, ...}: rows below head.size() are explicit, later rows
// use the translation-invariant offsets.
template <class S>
struct BandTable {
  std::vector<std::vector<std::pair<int, S>>> head;  // head[j] = (source k, p(k, j))
  std::vector<std::pair<int, S>> offsets;            // (k - j, p(k, j)) for j >= head.size()
};

template <class S>
inline S band_one(const BandTable<S>& t, const S* in, std::int64_t j, std::int64_t in_active) {
  S acc(0);
  if (j < static_cast<std::int64_t>(t.head.size())) {
    for (const auto& [k, p] : t.head[static_cast<std::size_t>(j)])
      if (k < in_active) acc += p * in[k];
  } else {
    for (const auto& [off, p] : t.offsets) {
      std::int64_t k = j + off;
      if (k >= 0 && k < in_active) acc += p * in[k];
    }
  }
  return acc;
}

template <class S>
void band_step_serial(const BandTable<S>& t, const S* in, std::int64_t in_active, S* out, std::int64_t out_active) {
  for (std::int64_t j = 0; j < out_active; ++j) out[j] = band_one(t, in, j, in_active);
}

template <class S>
void band_step_parallel(const BandTable<S>& t, const S* in, std::int64_t in_active, S* out,
                        std::int64_t out_active) {
  if constexpr (parallel_capable<S>) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < out_active; ++j) out[j] = band_one(t, in, j, in_active);
  } else {
    band_step_serial(t, in, in_active, out, out_active);
  }
}

}  // namespace ratlim::conv
