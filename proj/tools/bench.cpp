// Timing comparison between the OpenMP EGNN kernels and the serial reference
// forward, plus the tape forward/backward used in training.
// Usage: ead_bench [atoms hidden layers iters]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ead/egnn.hpp"
#include "ead/rng.hpp"

using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main(int argc, char** argv) {
  int atoms = 16, hidden = 64, layers = 4, iters = 50;
  if (argc == 5) {
    atoms = std::atoi(argv[1]);
    hidden = std::atoi(argv[2]);
    layers = std::atoi(argv[3]);
    iters = std::atoi(argv[4]);
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("atoms=%d hidden=%d layers=%d iters=%d\n", atoms, hidden, layers,
              iters);

  ead::EGNNParams params = ead::make_params({layers, hidden});
  ead::RngStream rng(7);
  ead::init_params(params, rng, /*zero_coord_head=*/false);

  ead::LatentState state;
  state.atoms = atoms;
  state.horizon = 100;
  state.pos.resize(static_cast<std::size_t>(atoms) * 3);
  state.type.resize(static_cast<std::size_t>(atoms) * ead::kTypeChannels);
  for (auto& v : state.pos) v = rng.normal();
  for (auto& v : state.type) v = rng.normal();
  state.t.assign(atoms, 50);

  std::vector<double> eps_pos, eps_type, ref_pos, ref_type;

  // Warm-up and agreement check.
  ead::dynamics_forward(params, state, {}, {}, eps_pos, eps_type);
  ead::dynamics_forward_reference(params, state, {}, {}, ref_pos, ref_type);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < eps_pos.size(); ++i)
    max_diff = std::max(max_diff, std::abs(eps_pos[i] - ref_pos[i]));
  for (std::size_t i = 0; i < eps_type.size(); ++i)
    max_diff = std::max(max_diff, std::abs(eps_type[i] - ref_type[i]));
  std::printf("parallel vs reference max |diff|: %.3g\n", max_diff);

  auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    ead::dynamics_forward(params, state, {}, {}, eps_pos, eps_type);
  const double par_ms = ms_since(t0) / iters;

  t0 = Clock::now();
  for (int i = 0; i < iters; ++i)
    ead::dynamics_forward_reference(params, state, {}, {}, ref_pos, ref_type);
  const double ref_ms = ms_since(t0) / iters;

  ead::EgnnTape tape;
  std::vector<double> grad(params.layout.total, 0.0);
  std::vector<double> g_pos(state.pos.size(), 1.0);
  std::vector<double> g_type(state.type.size(), 1.0);
  t0 = Clock::now();
  for (int i = 0; i < iters; ++i) {
    ead::dynamics_forward_tape(params, state, {}, tape, eps_pos, eps_type);
    ead::dynamics_backward(params, tape, g_pos, g_type, grad);
  }
  const double fb_ms = ms_since(t0) / iters;

  std::printf("forward  (openmp kernels): %8.3f ms\n", par_ms);
  std::printf("forward  (serial ref)    : %8.3f ms   speedup x%.2f\n", ref_ms,
              ref_ms / par_ms);
  std::printf("fwd+bwd  (openmp kernels): %8.3f ms\n", fb_ms);
  return 0;
}
