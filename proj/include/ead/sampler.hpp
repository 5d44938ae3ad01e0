#pragma once

#include <utility>
#include <vector>

#include "ead/asynctime.hpp"
#include "ead/egnn.hpp"
#include "ead/molecule.hpp"
#include "ead/rng.hpp"
#include "ead/schedule.hpp"

namespace ead {

struct SampleStats {
  long iterations = 0;
  long model_evals = 0;
  bool hit_cap = false;  // liveness guard forced the tail of the run
};

// Optional per-iteration record for schedule diagnostics.
struct ChainTrace {
  std::vector<TimestepVector> t_rows;            // record after each iteration
  std::vector<std::vector<double>> velocities;   // per-atom squared change
  std::vector<std::pair<TimestepVector, TimestepVector>> steps;  // (from, to)
};

// One reverse-transition update with per-atom levels. Expects s_i in
// [max(t_i - 1, 0), t_i]; atoms with s_i = t_i take the deterministic
// identity (no fresh noise), atoms with t_i = 0 are frozen and returned
// bitwise unchanged. Position channels are re-projected to the zero-CoM
// subspace of unfrozen atoms. Noise draw order: per updated atom in index
// order, 3 position channels then 6 type channels.
LatentState denoise_step(const LatentState& z, const TimestepVector& t,
                         const TimestepVector& s, const EGNNParams& params,
                         const NoiseSchedule& schedule, RngStream& rng,
                         long* model_evals = nullptr);

// Argmax-decode types, strip dummies, re-center the survivors. An all-dummy
// latent decodes to an empty molecule (flagged by size 0, not an error).
Molecule decode_latent(const LatentState& z, double type_scale = 1.0);

// Adaptive two-phase chain: synchronous warm-up for the first ~lambda
// fraction of the budget, then velocity-history-driven per-atom advancement
// with the boundary clamp, feature freezing and the liveness cap.
Molecule sample(const EGNNParams& params, int max_atoms, const AsyncConfig& cfg,
                const NoiseSchedule& schedule, RngStream& rng,
                SampleStats* stats = nullptr, ChainTrace* trace = nullptr);

// All atoms share one schedule; exactly T model evaluations.
Molecule sample_synchronous(const EGNNParams& params, int max_atoms,
                            const NoiseSchedule& schedule, RngStream& rng,
                            SampleStats* stats = nullptr,
                            ChainTrace* trace = nullptr);

// Follows the staircase matrix rows as consecutive (t, s) pairs.
Molecule sample_manual(const EGNNParams& params, int max_atoms, int u,
                       const NoiseSchedule& schedule, RngStream& rng,
                       SampleStats* stats = nullptr, ChainTrace* trace = nullptr);

}  // namespace ead
