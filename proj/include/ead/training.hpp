#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ead/asynctime.hpp"
#include "ead/egnn.hpp"
#include "ead/molecule.hpp"
#include "ead/rng.hpp"
#include "ead/schedule.hpp"

namespace ead {

struct TrainConfig {
  int horizon = 200;
  double precision = 1e-5;
  ModelDims dims;
  AsyncConfig async;
  bool sync_timesteps = false;  // synchronous (single shared t) baseline path
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  double type_loss_weight = 1.0;
  double type_scale = 1.0;
  std::uint64_t seed = 0;
};

struct TrainState {
  EGNNParams params;
  std::vector<double> ema;
  std::vector<double> m, v;  // optimizer moments
  long step = 0;
  std::uint64_t seed = 0;
};

// Raised when a step produces a non-finite loss.
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainState make_train_state(const TrainConfig& cfg);

struct NoisedSample {
  LatentState z;
  std::vector<double> eps_pos;   // projected over real atoms; the loss target
  std::vector<double> eps_type;
  std::vector<char> real_mask;
};

// z_i = alpha_{t_i} x_i + sigma_{t_i} eps_i per channel, with the position
// noise projected to the zero-CoM subspace of real atoms before mixing.
// Draw order: all position channels in atom order, then all type channels.
NoisedSample noise_molecule(const Molecule& mol, const TimestepVector& t,
                            const NoiseSchedule& schedule, double type_scale,
                            RngStream& rng);

// Same, with the raw noise supplied by the caller (tests inject zeros here).
NoisedSample noise_molecule_with(const Molecule& mol, const TimestepVector& t,
                                 const NoiseSchedule& schedule,
                                 double type_scale,
                                 std::vector<double> eps_pos,
                                 std::vector<double> eps_type);

// Mean over atoms of the squared noise prediction error. Dummy atoms
// contribute only their (weighted) type channels; positions of dummies are
// padding artifacts and are masked out.
double loss_diff(std::span<const double> eps_pos_true,
                 std::span<const double> eps_type_true,
                 std::span<const double> eps_pos_pred,
                 std::span<const double> eps_type_pred,
                 std::span<const char> real_mask, double type_weight);

// Loss plus gradient with respect to the prediction.
double loss_diff_grad(std::span<const double> eps_pos_true,
                      std::span<const double> eps_type_true,
                      std::span<const double> eps_pos_pred,
                      std::span<const double> eps_type_pred,
                      std::span<const char> real_mask, double type_weight,
                      std::vector<double>& g_pos, std::vector<double>& g_type);

// One optimizer step over a batch drawn from the dataset: per-molecule
// asynchronous noising, forward/backward, adaptive-moment update, EMA update.
// Deterministic given the seed; molecules in a batch are processed in
// parallel with gradients reduced in batch order.
double train_step(TrainState& state, const Dataset& data,
                  const TrainConfig& cfg, const NoiseSchedule& schedule);

}  // namespace ead
