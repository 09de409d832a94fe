// Serial vs OpenMP timings for the per-round server kernels at a
// ResNet-8-sized parameter count.

#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <omp.h>

#include "fedpurin/kernels.hpp"
#include "fedpurin/rng.hpp"

using fedpurin::kernels::Exec;
using h_clock = std::chrono::steady_clock;

template <typename F>
double best_ms(F&& f, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = h_clock::now();
    f();
    const double ms = std::chrono::duration<double, std::milli>(h_clock::now() - t0).count();
    if (ms < best) best = ms;
  }
  return best;
}

int main(int argc, char** argv) {
  std::size_t d = 1'230'000, clients = 20;
  try {
    if (argc > 1) d = std::stoul(argv[1]);
    if (argc > 2) clients = std::stoul(argv[2]);
  } catch (const std::exception&) {
    std::fprintf(stderr, "usage: bench_kernels [num_params] [num_clients]\n");
    return 1;
  }
  std::printf("d=%zu clients=%zu threads=%d\n", d, clients, omp_get_max_threads());

  fedpurin::rng::SplitMix64 gen(1);
  std::vector<std::vector<double>> models(clients, std::vector<double>(d));
  for (auto& m : models) {
    for (auto& v : m) v = gen.normal();
  }
  std::vector<const double*> rows;
  for (const auto& m : models) rows.push_back(m.data());
  fedpurin::Mask mask(d);
  for (std::size_t j = 0; j < d; ++j) mask.set(j, gen.uniform() < 0.5);
  std::vector<double> out(d), out_par(d);

  std::printf("%-22s %12s %12s %8s\n", "kernel", "serial_ms", "openmp_ms", "speedup");
  const auto report = [](const char* name, double s, double p) {
    std::printf("%-22s %12.3f %12.3f %8.2f\n", name, s, p, s / p);
  };

  report("perturbation_scores",
         best_ms([&] { fedpurin::kernels::perturbation_scores(models[0], models[1], true, out, Exec::serial); }),
         best_ms([&] { fedpurin::kernels::perturbation_scores(models[0], models[1], true, out_par, Exec::parallel); }));
  report("mean_rows", best_ms([&] { fedpurin::kernels::mean_rows(rows, out, Exec::serial); }),
         best_ms([&] { fedpurin::kernels::mean_rows(rows, out_par, Exec::parallel); }));
  report("select", best_ms([&] { fedpurin::kernels::select(mask, models[0], models[1], out, Exec::serial); }),
         best_ms([&] { fedpurin::kernels::select(mask, models[0], models[1], out_par, Exec::parallel); }));

  return out == out_par ? 0 : 1;
}
