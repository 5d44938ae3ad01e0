#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ead/rng.hpp"

namespace ead {

// One integer noise level per atom.
using TimestepVector = std::vector<int>;

// Knobs of the asynchronous machinery.
//
//   C           half-width of the per-atom offset interval around t*
//   dummy_bias  probability that a dummy atom's offset is drawn from [0, C]
//   lambda      fraction of the sampling budget spent in the synchronous
//               warm-up phase
//   w           velocity history window
//   K           phase budget (defaults to the diffusion horizon T)
//   K_hard_cap  absolute iteration cap guaranteeing sampling liveness
struct AsyncConfig {
  int C = 8;
  double dummy_bias = 0.5;
  double lambda = 0.8;
  int w = 2;
  long K = 0;
  long K_hard_cap = 0;

  void validate() const;
};

// Per-atom ring buffer of the w most recent velocity scalars.
class VelocityHistory {
 public:
  VelocityHistory(int atoms, int window);

  void push(std::span<const double> velocities);  // one entry per atom
  bool empty(int atom) const { return count_ == 0; }
  double min_of(int atom) const;  // smallest buffered value for the atom
  int atoms() const { return atoms_; }
  int window() const { return window_; }

 private:
  int atoms_;
  int window_;
  int count_ = 0;  // filled slots, <= window_
  int next_ = 0;   // ring write position
  std::vector<double> buf_;  // atoms_ x window_
};

// Local noise offset for one atom: uniform on [-C, C] for real atoms; for
// dummy atoms drawn from [0, C] with probability dummy_bias, else [-C, C].
int sample_offset(bool is_dummy, const AsyncConfig& cfg, RngStream& rng);

// Training-time noise levels: baseline t* ~ U{0..T}, per-atom offsets, then
// clamp to [0, T]. With C = 0 no per-atom draws happen, so the stream stays
// aligned with the synchronous special case.
TimestepVector sample_training_timesteps(int atoms, int horizon,
                                         const AsyncConfig& cfg,
                                         std::span<const char> dummy_mask,
                                         RngStream& rng);

// Per-atom squared latent change between consecutive iterations. Both buffers
// hold the same number of contiguous channels per atom.
std::vector<double> velocity(std::span<const double> prev,
                             std::span<const double> curr, int atoms);

// 1 iff the new velocity is at or below the buffered minimum (an empty buffer
// counts as convergent so the chain cannot stall with no evidence).
std::vector<std::uint8_t> compare(const VelocityHistory& history,
                                  std::span<const double> h_star);

// Synchronous warm-up test for iteration counter k counting down from K + 1.
bool synchronous_phase(long k, const AsyncConfig& cfg);

// Advance decision per atom: all ones in the warm-up phase, Compare-driven
// afterwards.
std::vector<std::uint8_t> advance_decision(long k, const AsyncConfig& cfg,
                                           const VelocityHistory& history,
                                           std::span<const double> h_star);

// Decrement by v, clamp to [0, T], then clamp to [min, min + 2C].
TimestepVector apply_advance(const TimestepVector& t,
                             std::span<const std::uint8_t> v, int horizon,
                             const AsyncConfig& cfg);

TimestepVector advance_timesteps(const TimestepVector& t, long k,
                                 const AsyncConfig& cfg,
                                 const VelocityHistory& history,
                                 std::span<const double> h_star, int horizon);

// Staircase scheduling matrix: atoms in window j (size u) lag window j - 1 by
// one level. First row all T, last row all 0, T + ceil(M/u) rows.
std::vector<TimestepVector> pyramid_schedule(int horizon, int atoms, int u);

}  // namespace ead
