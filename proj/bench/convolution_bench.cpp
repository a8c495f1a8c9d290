#include "ratlim/convolution.hpp"
#include "ratlim/walks.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

#include <cmath>

using namespace ratlim;

namespace {

// Gather table for the F2 preset on the ball of the given radius.
conv::GatherTable<Real> free_group_table(int radius) {
  WalkSpec spec = *preset_walk("f2-lazy-uniform");
  const Alphabet& a = spec.alphabet();
  BallIndex ball(a, radius);
  conv::GatherTable<Real> t;
  for (const auto& [g, p] : spec.steps().steps) {
    Word ginv = invert(a, g);
    std::vector<std::int64_t> src(static_cast<std::size_t>(ball.size()));
    for (std::int64_t i = 0; i < ball.size(); ++i) src[static_cast<std::size_t>(i)] = ball.right_multiply(i, ginv);
    t.source.push_back(std::move(src));
    t.weight.push_back(to_real(p));
  }
  return t;
}

// Band table of the distance chain of an isotropic walk with range 3 on T_3.
conv::BandTable<Real> radial_table() {
  RadialChain chain(WalkSpec::isotropic(2, {Rational(1, 4), Rational(1, 4), Rational(1, 4), Rational(1, 4)}));
  const int R = chain.range(), head = 2 * R + 1;
  conv::BandTable<Real> t;
  for (int j = 0; j < head; ++j) {
    std::vector<std::pair<int, Real>> col;
    for (const auto& [k, p] : chain.column(j)) col.emplace_back(k, to_real(p));
    t.head.push_back(std::move(col));
  }
  for (const auto& [k, p] : chain.column(head + R)) t.offsets.emplace_back(k - (head + R), to_real(p));
  return t;
}

std::vector<Real> input(std::size_t n) {
  std::vector<Real> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1 / (1 + static_cast<Real>(i % 97));
  return v;
}

template <bool Parallel>
void BM_gather(benchmark::State& state) {
  auto t = free_group_table(static_cast<int>(state.range(0)));
  const auto n = static_cast<std::int64_t>(t.source[0].size());
  auto in = input(static_cast<std::size_t>(n));
  std::vector<Real> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      conv::gather_step_parallel(t, in.data(), n, out.data(), n);
    else
      conv::gather_step_serial(t, in.data(), n, out.data(), n);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n);
  state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

template <bool Parallel>
void BM_band(benchmark::State& state) {
  auto t = radial_table();
  const std::int64_t n = state.range(0);
  auto in = input(static_cast<std::size_t>(n));
  std::vector<Real> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      conv::band_step_parallel(t, in.data(), n, out.data(), n);
    else
      conv::band_step_serial(t, in.data(), n, out.data(), n);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n);
  state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

}  // namespace

BENCHMARK(BM_gather<false>)->Name("gather/serial")->Arg(8)->Arg(10)->Arg(12);
BENCHMARK(BM_gather<true>)->Name("gather/openmp")->Arg(8)->Arg(10)->Arg(12);
BENCHMARK(BM_band<false>)->Name("band/serial")->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_band<true>)->Name("band/openmp")->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

BENCHMARK_MAIN();
