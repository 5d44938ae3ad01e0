#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ead/asynctime.hpp"
#include "ead/rng.hpp"

namespace ead {

inline constexpr int kTypeChannels = 6;
inline constexpr int kInputFeatures = kTypeChannels + 1;  // one-hot + t/T

struct ModelDims {
  int layers = 4;
  int hidden = 64;

  bool operator==(const ModelDims&) const = default;
};

// Offsets of one affine map W (out x in, row-major) and bias b inside the
// flat parameter vector.
struct DenseSlice {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
};

// Per-layer networks: the edge MLP (phi_e), the coordinate MLP (phi_x), the
// soft edge weight (phi_inf) and the feature MLP (phi_h). The MLPs have two
// hidden layers of the hidden width with SiLU activations and a linear head.
struct LayerSlices {
  DenseSlice e1, e2, e3;
  DenseSlice x1, x2, x3;
  DenseSlice inf;
  DenseSlice h1, h2, h3;
};

struct ParamLayout {
  ParamLayout() = default;
  explicit ParamLayout(const ModelDims& dims);

  DenseSlice embed;  // kInputFeatures -> hidden
  std::vector<LayerSlices> layer;
  DenseSlice decode;  // hidden -> kTypeChannels
  std::size_t total = 0;
};

struct EGNNParams {
  ModelDims dims;
  ParamLayout layout;
  std::vector<double> theta;
};

EGNNParams make_params(const ModelDims& dims);

// Fan-in scaled normal init, biases zero. The phi_x head starts at zero so the
// untrained network is the identity on coordinates; tests that need gradient
// signal everywhere pass zero_coord_head = false.
void init_params(EGNNParams& params, RngStream& rng, bool zero_coord_head = true);

// Noisy latent of one molecule plus its per-atom noise levels.
struct LatentState {
  int atoms = 0;
  int horizon = 1;           // T, for the t/T conditioning feature
  std::vector<double> pos;   // atoms x 3
  std::vector<double> type;  // atoms x kTypeChannels
  TimestepVector t;

  void check() const;
};

// One message-passing layer. Frozen atoms keep their features and coordinates
// but still send messages. Exposed mostly for tests; empty masks mean none.
void egcl_forward(const EGNNParams& params, int layer,
                  std::span<const double> h, std::span<const double> x,
                  int atoms, std::span<const char> freeze_mask,
                  std::vector<double>& h_out, std::vector<double>& x_out);

// Full noise prediction: embed, L layers, position noise as the coordinate
// displacement projected to the zero-CoM subspace of project_mask (empty =
// all atoms), type noise decoded from final features.
void dynamics_forward(const EGNNParams& params, const LatentState& state,
                      std::span<const char> project_mask,
                      std::span<const char> freeze_mask,
                      std::vector<double>& eps_pos,
                      std::vector<double>& eps_type);

// Recorded intermediates of one forward pass, consumed by the backward pass.
struct LayerTape {
  std::vector<double> h_in, x_in;
  std::vector<double> ein, z1e, a1e, z2e, a2e, me;
  std::vector<double> inf_pre, inf_val;
  std::vector<double> z1x, a1x, z2x, a2x, sx;
  std::vector<double> diff, dist;
  std::vector<double> agg, hin, z1h, a1h, z2h, a2h;
  std::vector<double> h_out, x_out;
};

struct EgnnTape {
  int atoms = 0;
  std::vector<double> feat;  // atoms x kInputFeatures
  std::vector<double> h0;
  std::vector<LayerTape> layers;
  std::vector<char> project_mask;
};

void dynamics_forward_tape(const EGNNParams& params, const LatentState& state,
                           std::span<const char> project_mask, EgnnTape& tape,
                           std::vector<double>& eps_pos,
                           std::vector<double>& eps_type);

// Accumulates d(loss)/d(theta) into grad for upstream gradients with respect
// to the two noise outputs. grad must have layout.total entries.
void dynamics_backward(const EGNNParams& params, const EgnnTape& tape,
                       std::span<const double> g_eps_pos,
                       std::span<const double> g_eps_type,
                       std::vector<double>& grad);

// Straightforward serial implementation kept as a correctness baseline for
// the OpenMP kernels; same summation order, so results match bit for bit.
void egcl_forward_reference(const EGNNParams& params, int layer,
                            std::span<const double> h,
                            std::span<const double> x, int atoms,
                            std::span<const char> freeze_mask,
                            std::vector<double>& h_out,
                            std::vector<double>& x_out);

void dynamics_forward_reference(const EGNNParams& params,
                                const LatentState& state,
                                std::span<const char> project_mask,
                                std::span<const char> freeze_mask,
                                std::vector<double>& eps_pos,
                                std::vector<double>& eps_type);

namespace detail {

// Shared scalar pieces so the parallel and reference paths round identically.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Subtract the masked mean from masked rows (empty mask = all rows).
void project_rows(double* rows, int n, std::span<const char> mask);

}  // namespace detail

}  // namespace ead
