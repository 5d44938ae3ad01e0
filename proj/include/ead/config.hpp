#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "ead/asynctime.hpp"
#include "ead/egnn.hpp"
#include "ead/training.hpp"

namespace ead {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resolved run configuration. Values come from (highest precedence first)
// command-line overrides, the config file, and the defaults below.
struct RunConfig {
  // schedule
  int horizon = 200;
  double precision = 1e-5;
  // model
  int layers = 4;
  int hidden = 64;
  // asynchrony
  int C = -1;  // -1: use the maximum molecule size of the training set
  double dummy_bias = 0.5;
  double lambda = 0.8;
  int window = 2;
  long K = -1;          // -1: defaults to horizon
  long K_hard_cap = -1;  // -1: defaults to 3 * horizon
  // training
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  int steps = 2000;
  std::uint64_t seed = 0;
  double type_loss_weight = 1.0;
  double type_scale = 1.0;
  bool sync_timesteps = false;
  int checkpoint_every = 500;
  // data
  std::string dataset = "toy";  // "toy" or a path to a multi-frame XYZ file
  int toy_n = 16;
  double jitter = 0.01;
  std::string data_dir = "data";
  // sampling
  int sample_n = 16;
  std::string sample_mode = "adaptive";  // adaptive | sync | manual
  int manual_u = 1;
  int max_atoms = -1;  // -1: training M_max from the checkpoint

  static RunConfig load(const std::string& path);
  void apply(const std::string& key, const std::string& value);

  // Fill derived defaults (K, K_hard_cap, C given the dataset max size).
  void resolve(int dataset_max_size);

  AsyncConfig async_config() const;
  TrainConfig train_config() const;

  // Frozen key=value copy sufficient to reproduce the run.
  void write(std::ostream& os) const;
};

}  // namespace ead
