#include <cstring>
#include <stdexcept>

#include "ead/egnn.hpp"

// Plain single-threaded EGNN forward used to validate the OpenMP kernels.
// Accumulation orders match the parallel path exactly (neighbors in index
// order, dot products over the input dimension), so outputs are expected to
// agree bit for bit.

namespace ead {

namespace {

void dense_row(const double* theta, const DenseSlice& s, const double* x,
               double* y) {
  const double* w = theta + s.w;
  const double* b = theta + s.b;
  for (int o = 0; o < s.out; ++o) {
    double acc = b[o];
    const double* wo = w + static_cast<std::size_t>(o) * s.in;
    for (int c = 0; c < s.in; ++c) acc += wo[c] * x[c];
    y[o] = acc;
  }
}

void mlp3_row(const double* theta, const LayerSlices& ls, bool coord,
              const double* x, int hidden, double* out) {
  std::vector<double> z1(hidden), z2(hidden);
  dense_row(theta, coord ? ls.x1 : ls.e1, x, z1.data());
  for (int c = 0; c < hidden; ++c) z1[c] = detail::silu(z1[c]);
  dense_row(theta, coord ? ls.x2 : ls.e2, z1.data(), z2.data());
  for (int c = 0; c < hidden; ++c) z2[c] = detail::silu(z2[c]);
  dense_row(theta, coord ? ls.x3 : ls.e3, z2.data(), out);
}

}  // namespace

void egcl_forward_reference(const EGNNParams& params, int layer,
                            std::span<const double> h,
                            std::span<const double> x, int atoms,
                            std::span<const char> freeze_mask,
                            std::vector<double>& h_out,
                            std::vector<double>& x_out) {
  if (atoms < 1)
    throw std::invalid_argument("egcl_forward_reference: atoms must be >= 1");
  const int hidden = params.dims.hidden;
  const LayerSlices& ls = params.layout.layer[layer];
  const double* theta = params.theta.data();

  h_out.assign(static_cast<std::size_t>(atoms) * hidden, 0.0);
  x_out.assign(x.begin(), x.end());

  std::vector<double> ein(2 * hidden + 1);
  std::vector<double> m(hidden), agg(hidden), hin(2 * hidden);
  std::vector<double> z1(hidden), z2(hidden);
  for (int i = 0; i < atoms; ++i) {
    std::fill(agg.begin(), agg.end(), 0.0);
    double* xi = x_out.data() + static_cast<std::size_t>(i) * 3;
    for (int j = 0; j < atoms; ++j) {
      if (j == i) continue;
      double diff[3], d2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        diff[d] = x[i * 3 + d] - x[j * 3 + d];
        d2 += diff[d] * diff[d];
      }
      const double dist = std::sqrt(d2);
      std::memcpy(ein.data(), h.data() + static_cast<std::size_t>(i) * hidden,
                  sizeof(double) * hidden);
      std::memcpy(ein.data() + hidden,
                  h.data() + static_cast<std::size_t>(j) * hidden,
                  sizeof(double) * hidden);
      ein[2 * hidden] = d2;

      mlp3_row(theta, ls, false, ein.data(), hidden, m.data());
      double inf_pre;
      dense_row(theta, ls.inf, m.data(), &inf_pre);
      const double w = detail::sigmoid(inf_pre);
      for (int c = 0; c < hidden; ++c) agg[c] += w * m[c];

      double sx;
      mlp3_row(theta, ls, true, ein.data(), hidden, &sx);
      const double scale = sx / (dist + 1.0);
      for (int d = 0; d < 3; ++d) xi[d] += scale * diff[d];
    }
    std::memcpy(hin.data(), h.data() + static_cast<std::size_t>(i) * hidden,
                sizeof(double) * hidden);
    std::memcpy(hin.data() + hidden, agg.data(), sizeof(double) * hidden);
    dense_row(theta, ls.h1, hin.data(), z1.data());
    for (int c = 0; c < hidden; ++c) z1[c] = detail::silu(z1[c]);
    dense_row(theta, ls.h2, z1.data(), z2.data());
    for (int c = 0; c < hidden; ++c) z2[c] = detail::silu(z2[c]);
    dense_row(theta, ls.h3, z2.data(),
              h_out.data() + static_cast<std::size_t>(i) * hidden);
  }

  if (!freeze_mask.empty()) {
    for (int i = 0; i < atoms; ++i) {
      if (!freeze_mask[i]) continue;
      std::memcpy(h_out.data() + static_cast<std::size_t>(i) * hidden,
                  h.data() + static_cast<std::size_t>(i) * hidden,
                  sizeof(double) * hidden);
      std::memcpy(x_out.data() + static_cast<std::size_t>(i) * 3,
                  x.data() + static_cast<std::size_t>(i) * 3, sizeof(double) * 3);
    }
  }
}

void dynamics_forward_reference(const EGNNParams& params,
                                const LatentState& state,
                                std::span<const char> project_mask,
                                std::span<const char> freeze_mask,
                                std::vector<double>& eps_pos,
                                std::vector<double>& eps_type) {
  state.check();
  const int atoms = state.atoms;
  const int hidden = params.dims.hidden;
  const double* theta = params.theta.data();

  std::vector<double> feat(kInputFeatures);
  std::vector<double> h(static_cast<std::size_t>(atoms) * hidden);
  for (int i = 0; i < atoms; ++i) {
    for (int c = 0; c < kTypeChannels; ++c)
      feat[c] = state.type[static_cast<std::size_t>(i) * kTypeChannels + c];
    feat[kTypeChannels] =
        static_cast<double>(state.t[i]) / static_cast<double>(state.horizon);
    dense_row(theta, params.layout.embed, feat.data(),
              h.data() + static_cast<std::size_t>(i) * hidden);
  }

  std::vector<double> xcur(state.pos.begin(), state.pos.end());
  std::vector<double> h_next, x_next;
  for (int l = 0; l < params.dims.layers; ++l) {
    egcl_forward_reference(params, l, h, xcur, atoms, freeze_mask, h_next, x_next);
    h = h_next;
    xcur = x_next;
  }

  eps_pos.resize(static_cast<std::size_t>(atoms) * 3);
  for (std::size_t i = 0; i < eps_pos.size(); ++i)
    eps_pos[i] = xcur[i] - state.pos[i];
  detail::project_rows(eps_pos.data(), atoms, project_mask);

  eps_type.resize(static_cast<std::size_t>(atoms) * kTypeChannels);
  for (int i = 0; i < atoms; ++i)
    dense_row(theta, params.layout.decode,
              h.data() + static_cast<std::size_t>(i) * hidden,
              eps_type.data() + static_cast<std::size_t>(i) * kTypeChannels);

  (void)freeze_mask;
}

}  // namespace ead
