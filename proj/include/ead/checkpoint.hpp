#pragma once

#include <stdexcept>
#include <string>

#include "ead/training.hpp"

namespace ead {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Versioned binary checkpoint with a shape header. Layout (little-endian):
//   magic "EADCKPT1", u32 version, i32 layers, i32 hidden, i32 horizon,
//   i32 max_atoms, f64 precision, f64 type_scale, i64 step, u64 seed,
//   then four length-prefixed f64 arrays: theta, ema, adam_m, adam_v.
struct Checkpoint {
  ModelDims dims;
  int horizon = 0;
  int max_atoms = 0;
  double precision = 0.0;
  double type_scale = 1.0;
  TrainState state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ead
