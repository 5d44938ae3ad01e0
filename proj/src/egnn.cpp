#include "ead/egnn.hpp"

#include <cstring>
#include <stdexcept>

namespace ead {

namespace {

DenseSlice add_dense(std::size_t& offset, int in, int out) {
  DenseSlice s;
  s.in = in;
  s.out = out;
  s.w = offset;
  offset += static_cast<std::size_t>(in) * out;
  s.b = offset;
  offset += out;
  return s;
}

// y (rows x out) = x (rows x in) * W^T + b. Rows are independent, so the
// parallel loop is bitwise deterministic for any thread count.
void dense_forward(const double* theta, const DenseSlice& s, const double* x,
                   int rows, double* y) {
  const double* w = theta + s.w;
  const double* b = theta + s.b;
  const int in = s.in, out = s.out;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<std::size_t>(r) * in;
    double* yr = y + static_cast<std::size_t>(r) * out;
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wo = w + static_cast<std::size_t>(o) * in;
      for (int c = 0; c < in; ++c) acc += wo[c] * xr[c];
      yr[o] = acc;
    }
  }
}

// gx (rows x in) = gy (rows x out) * W. Overwrites gx.
void dense_backward_data(const double* theta, const DenseSlice& s,
                         const double* gy, int rows, double* gx) {
  const double* w = theta + s.w;
  const int in = s.in, out = s.out;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* gr = gy + static_cast<std::size_t>(r) * out;
    double* gxr = gx + static_cast<std::size_t>(r) * in;
    for (int c = 0; c < in; ++c) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += gr[o] * w[static_cast<std::size_t>(o) * in + c];
      gxr[c] = acc;
    }
  }
}

// gW += gy^T * x, gb += column sums of gy. Each output entry owns its own
// serial reduction over rows, which keeps the sum order fixed.
void dense_backward_param(const DenseSlice& s, const double* x,
                          const double* gy, int rows, double* grad) {
  double* gw = grad + s.w;
  double* gb = grad + s.b;
  const int in = s.in, out = s.out;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    for (int c = 0; c < in; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r)
        acc += gy[static_cast<std::size_t>(r) * out + o] *
               x[static_cast<std::size_t>(r) * in + c];
      gw[static_cast<std::size_t>(o) * in + c] += acc;
    }
    double acc = 0.0;
    for (int r = 0; r < rows; ++r) acc += gy[static_cast<std::size_t>(r) * out + o];
    gb[o] += acc;
  }
}

void silu_forward(const double* z, std::size_t n, double* a) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    a[i] = detail::silu(z[i]);
}

// gz = ga .* silu'(z)
void silu_backward(const double* z, const double* ga, std::size_t n, double* gz) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    gz[i] = ga[i] * detail::silu_grad(z[i]);
}

// Three-dense SiLU MLP forward over a row batch, recording pre-activations.
void mlp3_forward(const double* theta, const DenseSlice& d1,
                  const DenseSlice& d2, const DenseSlice& d3, const double* x,
                  int rows, std::vector<double>& z1, std::vector<double>& a1,
                  std::vector<double>& z2, std::vector<double>& a2,
                  std::vector<double>& y) {
  z1.resize(static_cast<std::size_t>(rows) * d1.out);
  a1.resize(z1.size());
  z2.resize(static_cast<std::size_t>(rows) * d2.out);
  a2.resize(z2.size());
  y.resize(static_cast<std::size_t>(rows) * d3.out);
  if (rows == 0) return;
  dense_forward(theta, d1, x, rows, z1.data());
  silu_forward(z1.data(), z1.size(), a1.data());
  dense_forward(theta, d2, a1.data(), rows, z2.data());
  silu_forward(z2.data(), z2.size(), a2.data());
  dense_forward(theta, d3, a2.data(), rows, y.data());
}

// Matching backward: emits input gradients and accumulates parameter grads.
void mlp3_backward(const double* theta, const DenseSlice& d1,
                   const DenseSlice& d2, const DenseSlice& d3, const double* x,
                   const std::vector<double>& z1, const std::vector<double>& a1,
                   const std::vector<double>& z2, const std::vector<double>& a2,
                   const double* gy, int rows, double* gx, double* grad) {
  if (rows == 0) return;
  std::vector<double> ga2(static_cast<std::size_t>(rows) * d3.in);
  dense_backward_param(d3, a2.data(), gy, rows, grad);
  dense_backward_data(theta, d3, gy, rows, ga2.data());
  std::vector<double> gz2(ga2.size());
  silu_backward(z2.data(), ga2.data(), gz2.size(), gz2.data());
  std::vector<double> ga1(static_cast<std::size_t>(rows) * d2.in);
  dense_backward_param(d2, a1.data(), gz2.data(), rows, grad);
  dense_backward_data(theta, d2, gz2.data(), rows, ga1.data());
  std::vector<double> gz1(ga1.size());
  silu_backward(z1.data(), ga1.data(), gz1.size(), gz1.data());
  dense_backward_param(d1, x, gz1.data(), rows, grad);
  dense_backward_data(theta, d1, gz1.data(), rows, gx);
}

inline std::size_t edge_index(int i, int j, int atoms) {
  return static_cast<std::size_t>(i) * (atoms - 1) + (j < i ? j : j - 1);
}

// Edge geometry plus the shared phi_e / phi_x input rows [h_i, h_j, d_ij^2].
void build_edges(const double* h, const double* x, int atoms, int hidden,
                 std::vector<double>& ein, std::vector<double>& diff,
                 std::vector<double>& dist) {
  const int edges = atoms * (atoms - 1);
  const int ein_cols = 2 * hidden + 1;
  ein.resize(static_cast<std::size_t>(edges) * ein_cols);
  diff.resize(static_cast<std::size_t>(edges) * 3);
  dist.resize(edges);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < atoms; ++i) {
    for (int j = 0; j < atoms; ++j) {
      if (j == i) continue;
      const std::size_t e = edge_index(i, j, atoms);
      double* de = diff.data() + e * 3;
      double d2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        de[d] = x[i * 3 + d] - x[j * 3 + d];
        d2 += de[d] * de[d];
      }
      dist[e] = std::sqrt(d2);
      double* row = ein.data() + e * ein_cols;
      std::memcpy(row, h + static_cast<std::size_t>(i) * hidden,
                  sizeof(double) * hidden);
      std::memcpy(row + hidden, h + static_cast<std::size_t>(j) * hidden,
                  sizeof(double) * hidden);
      row[2 * hidden] = d2;
    }
  }
}

struct LayerOut {
  std::vector<double> h, x;
};

// One EGCL layer. When tape is non-null all intermediates are recorded and
// freezing must be off (training never freezes).
void egcl_run(const EGNNParams& params, int layer, const double* h,
              const double* x, int atoms, std::span<const char> freeze_mask,
              LayerTape* tape, LayerOut& out) {
  const int hidden = params.dims.hidden;
  const int edges = atoms * (atoms - 1);
  const LayerSlices& ls = params.layout.layer[layer];
  const double* theta = params.theta.data();

  LayerTape local;
  LayerTape& t = tape ? *tape : local;

  build_edges(h, x, atoms, hidden, t.ein, t.diff, t.dist);
  mlp3_forward(theta, ls.e1, ls.e2, ls.e3, t.ein.data(), edges, t.z1e, t.a1e,
               t.z2e, t.a2e, t.me);
  mlp3_forward(theta, ls.x1, ls.x2, ls.x3, t.ein.data(), edges, t.z1x, t.a1x,
               t.z2x, t.a2x, t.sx);

  t.inf_pre.resize(edges);
  t.inf_val.resize(edges);
  if (edges > 0) {
    dense_forward(theta, ls.inf, t.me.data(), edges, t.inf_pre.data());
#pragma omp parallel for schedule(static)
    for (int e = 0; e < edges; ++e) t.inf_val[e] = detail::sigmoid(t.inf_pre[e]);
  }

  // Aggregate messages and coordinate terms per atom, neighbors in index
  // order.
  t.agg.assign(static_cast<std::size_t>(atoms) * hidden, 0.0);
  out.x.assign(static_cast<std::size_t>(atoms) * 3, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < atoms; ++i) {
    double* agg_i = t.agg.data() + static_cast<std::size_t>(i) * hidden;
    double* x_i = out.x.data() + static_cast<std::size_t>(i) * 3;
    for (int d = 0; d < 3; ++d) x_i[d] = x[i * 3 + d];
    for (int j = 0; j < atoms; ++j) {
      if (j == i) continue;
      const std::size_t e = edge_index(i, j, atoms);
      const double w = t.inf_val[e];
      const double* me = t.me.data() + e * hidden;
      for (int c = 0; c < hidden; ++c) agg_i[c] += w * me[c];
      const double scale = t.sx[e] / (t.dist[e] + 1.0);
      const double* de = t.diff.data() + e * 3;
      for (int d = 0; d < 3; ++d) x_i[d] += scale * de[d];
    }
  }

  t.hin.resize(static_cast<std::size_t>(atoms) * 2 * hidden);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < atoms; ++i) {
    std::memcpy(t.hin.data() + static_cast<std::size_t>(i) * 2 * hidden,
                h + static_cast<std::size_t>(i) * hidden, sizeof(double) * hidden);
    std::memcpy(t.hin.data() + static_cast<std::size_t>(i) * 2 * hidden + hidden,
                t.agg.data() + static_cast<std::size_t>(i) * hidden,
                sizeof(double) * hidden);
  }
  mlp3_forward(theta, ls.h1, ls.h2, ls.h3, t.hin.data(), atoms, t.z1h, t.a1h,
               t.z2h, t.a2h, out.h);

  if (!freeze_mask.empty()) {
    for (int i = 0; i < atoms; ++i) {
      if (!freeze_mask[i]) continue;
      std::memcpy(out.h.data() + static_cast<std::size_t>(i) * hidden,
                  h + static_cast<std::size_t>(i) * hidden, sizeof(double) * hidden);
      std::memcpy(out.x.data() + static_cast<std::size_t>(i) * 3, x + i * 3,
                  sizeof(double) * 3);
    }
  }

  if (tape) {
    tape->h_in.assign(h, h + static_cast<std::size_t>(atoms) * hidden);
    tape->x_in.assign(x, x + static_cast<std::size_t>(atoms) * 3);
    tape->h_out = out.h;
    tape->x_out = out.x;
  }
}

void embed_features(const LatentState& state, std::vector<double>& feat) {
  const int atoms = state.atoms;
  feat.resize(static_cast<std::size_t>(atoms) * kInputFeatures);
  for (int i = 0; i < atoms; ++i) {
    double* f = feat.data() + static_cast<std::size_t>(i) * kInputFeatures;
    for (int c = 0; c < kTypeChannels; ++c)
      f[c] = state.type[static_cast<std::size_t>(i) * kTypeChannels + c];
    f[kTypeChannels] =
        static_cast<double>(state.t[i]) / static_cast<double>(state.horizon);
  }
}

void run_model(const EGNNParams& params, const LatentState& state,
               std::span<const char> project_mask,
               std::span<const char> freeze_mask, EgnnTape* tape,
               std::vector<double>& eps_pos, std::vector<double>& eps_type) {
  state.check();
  const int atoms = state.atoms;
  const int hidden = params.dims.hidden;

  std::vector<double> feat;
  embed_features(state, feat);
  std::vector<double> h0(static_cast<std::size_t>(atoms) * hidden);
  dense_forward(params.theta.data(), params.layout.embed, feat.data(), atoms,
                h0.data());

  if (tape) {
    tape->atoms = atoms;
    tape->feat = feat;
    tape->h0 = h0;
    tape->layers.resize(params.dims.layers);
    tape->project_mask.assign(project_mask.begin(), project_mask.end());
  }

  LayerOut cur;
  cur.h = std::move(h0);
  cur.x = state.pos;
  for (int l = 0; l < params.dims.layers; ++l) {
    LayerOut next;
    egcl_run(params, l, cur.h.data(), cur.x.data(), atoms, freeze_mask,
             tape ? &tape->layers[l] : nullptr, next);
    cur = std::move(next);
  }

  eps_pos.resize(static_cast<std::size_t>(atoms) * 3);
  for (std::size_t i = 0; i < eps_pos.size(); ++i)
    eps_pos[i] = cur.x[i] - state.pos[i];
  detail::project_rows(eps_pos.data(), atoms, project_mask);

  eps_type.resize(static_cast<std::size_t>(atoms) * kTypeChannels);
  dense_forward(params.theta.data(), params.layout.decode, cur.h.data(), atoms,
                eps_type.data());
}

}  // namespace

ParamLayout::ParamLayout(const ModelDims& dims) {
  if (dims.layers < 1 || dims.hidden < 1)
    throw std::invalid_argument("ModelDims: layers and hidden must be >= 1");
  std::size_t off = 0;
  const int d = dims.hidden;
  embed = add_dense(off, kInputFeatures, d);
  layer.resize(dims.layers);
  for (auto& ls : layer) {
    ls.e1 = add_dense(off, 2 * d + 1, d);
    ls.e2 = add_dense(off, d, d);
    ls.e3 = add_dense(off, d, d);
    ls.x1 = add_dense(off, 2 * d + 1, d);
    ls.x2 = add_dense(off, d, d);
    ls.x3 = add_dense(off, d, 1);
    ls.inf = add_dense(off, d, 1);
    ls.h1 = add_dense(off, 2 * d, d);
    ls.h2 = add_dense(off, d, d);
    ls.h3 = add_dense(off, d, d);
  }
  decode = add_dense(off, d, kTypeChannels);
  total = off;
}

EGNNParams make_params(const ModelDims& dims) {
  EGNNParams p;
  p.dims = dims;
  p.layout = ParamLayout(dims);
  p.theta.assign(p.layout.total, 0.0);
  return p;
}

void init_params(EGNNParams& params, RngStream& rng, bool zero_coord_head) {
  auto fill = [&](const DenseSlice& s, bool zero) {
    const double scale = zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(s.in));
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.in) * s.out; ++k)
      params.theta[s.w + k] = zero ? 0.0 : scale * rng.normal();
    for (int o = 0; o < s.out; ++o) params.theta[s.b + o] = 0.0;
  };
  fill(params.layout.embed, false);
  for (const auto& ls : params.layout.layer) {
    fill(ls.e1, false);
    fill(ls.e2, false);
    fill(ls.e3, false);
    fill(ls.x1, false);
    fill(ls.x2, false);
    fill(ls.x3, zero_coord_head);
    fill(ls.inf, false);
    fill(ls.h1, false);
    fill(ls.h2, false);
    fill(ls.h3, false);
  }
  fill(params.layout.decode, false);
}

void LatentState::check() const {
  if (atoms < 1) throw std::invalid_argument("LatentState: atoms must be >= 1");
  if (horizon < 1) throw std::invalid_argument("LatentState: horizon must be >= 1");
  if (pos.size() != static_cast<std::size_t>(atoms) * 3 ||
      type.size() != static_cast<std::size_t>(atoms) * kTypeChannels ||
      t.size() != static_cast<std::size_t>(atoms))
    throw std::invalid_argument("LatentState: inconsistent shapes");
  for (int ti : t)
    if (ti < 0 || ti > horizon)
      throw std::invalid_argument("LatentState: timestep outside [0, T]");
}

void detail::project_rows(double* rows, int n, std::span<const char> mask) {
  double mean[3] = {0, 0, 0};
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++count;
    for (int d = 0; d < 3; ++d) mean[d] += rows[i * 3 + d];
  }
  if (count == 0) return;
  for (int d = 0; d < 3; ++d) mean[d] /= count;
  for (int i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    for (int d = 0; d < 3; ++d) rows[i * 3 + d] -= mean[d];
  }
}

void egcl_forward(const EGNNParams& params, int layer,
                  std::span<const double> h, std::span<const double> x,
                  int atoms, std::span<const char> freeze_mask,
                  std::vector<double>& h_out, std::vector<double>& x_out) {
  if (atoms < 1) throw std::invalid_argument("egcl_forward: atoms must be >= 1");
  if (layer < 0 || layer >= params.dims.layers)
    throw std::invalid_argument("egcl_forward: layer out of range");
  if (h.size() != static_cast<std::size_t>(atoms) * params.dims.hidden ||
      x.size() != static_cast<std::size_t>(atoms) * 3)
    throw std::invalid_argument("egcl_forward: shape mismatch");
  LayerOut out;
  egcl_run(params, layer, h.data(), x.data(), atoms, freeze_mask, nullptr, out);
  h_out = std::move(out.h);
  x_out = std::move(out.x);
}

void dynamics_forward(const EGNNParams& params, const LatentState& state,
                      std::span<const char> project_mask,
                      std::span<const char> freeze_mask,
                      std::vector<double>& eps_pos,
                      std::vector<double>& eps_type) {
  run_model(params, state, project_mask, freeze_mask, nullptr, eps_pos, eps_type);
}

void dynamics_forward_tape(const EGNNParams& params, const LatentState& state,
                           std::span<const char> project_mask, EgnnTape& tape,
                           std::vector<double>& eps_pos,
                           std::vector<double>& eps_type) {
  run_model(params, state, project_mask, {}, &tape, eps_pos, eps_type);
}

void dynamics_backward(const EGNNParams& params, const EgnnTape& tape,
                       std::span<const double> g_eps_pos,
                       std::span<const double> g_eps_type,
                       std::vector<double>& grad) {
  const int atoms = tape.atoms;
  const int hidden = params.dims.hidden;
  const int edges = atoms * (atoms - 1);
  const int ein_cols = 2 * hidden + 1;
  const double* theta = params.theta.data();
  if (grad.size() != params.layout.total)
    throw std::invalid_argument("dynamics_backward: grad size mismatch");
  if (g_eps_pos.size() != static_cast<std::size_t>(atoms) * 3 ||
      g_eps_type.size() != static_cast<std::size_t>(atoms) * kTypeChannels)
    throw std::invalid_argument("dynamics_backward: upstream shape mismatch");

  const std::vector<double>& h_final =
      tape.layers.empty() ? tape.h0 : tape.layers.back().h_out;

  // Position head: eps_pos = P (x_L - x_0); the projector is symmetric, so
  // the upstream gradient is projected the same way.
  std::vector<double> gx(g_eps_pos.begin(), g_eps_pos.end());
  detail::project_rows(gx.data(), atoms, tape.project_mask);

  // Type head.
  std::vector<double> gh(static_cast<std::size_t>(atoms) * hidden);
  dense_backward_param(params.layout.decode, h_final.data(), g_eps_type.data(),
                       atoms, grad.data());
  dense_backward_data(theta, params.layout.decode, g_eps_type.data(), atoms,
                      gh.data());

  for (int l = params.dims.layers - 1; l >= 0; --l) {
    const LayerTape& t = tape.layers[l];
    const LayerSlices& ls = params.layout.layer[l];

    // phi_h
    std::vector<double> ghin(static_cast<std::size_t>(atoms) * 2 * hidden);
    mlp3_backward(theta, ls.h1, ls.h2, ls.h3, t.hin.data(), t.z1h, t.a1h,
                  t.z2h, t.a2h, gh.data(), atoms, ghin.data(), grad.data());

    std::vector<double> gh_in(static_cast<std::size_t>(atoms) * hidden);
    std::vector<double> gagg(static_cast<std::size_t>(atoms) * hidden);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < atoms; ++i) {
      std::memcpy(gh_in.data() + static_cast<std::size_t>(i) * hidden,
                  ghin.data() + static_cast<std::size_t>(i) * 2 * hidden,
                  sizeof(double) * hidden);
      std::memcpy(gagg.data() + static_cast<std::size_t>(i) * hidden,
                  ghin.data() + static_cast<std::size_t>(i) * 2 * hidden + hidden,
                  sizeof(double) * hidden);
    }

    // Per-edge gradients from the aggregation and the coordinate update.
    std::vector<double> gsx(edges), ginf(edges), gme(static_cast<std::size_t>(edges) * hidden);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < atoms; ++i) {
      const double* gx_i = gx.data() + static_cast<std::size_t>(i) * 3;
      const double* gagg_i = gagg.data() + static_cast<std::size_t>(i) * hidden;
      for (int j = 0; j < atoms; ++j) {
        if (j == i) continue;
        const std::size_t e = edge_index(i, j, atoms);
        const double inv = 1.0 / (t.dist[e] + 1.0);
        const double* de = t.diff.data() + e * 3;
        double gdot = 0.0;
        for (int d = 0; d < 3; ++d) gdot += gx_i[d] * de[d];
        gsx[e] = gdot * inv;
        const double* me = t.me.data() + e * hidden;
        double gi = 0.0;
        for (int c = 0; c < hidden; ++c) gi += gagg_i[c] * me[c];
        ginf[e] = gi;
        double* gme_e = gme.data() + e * hidden;
        const double w = t.inf_val[e];
        for (int c = 0; c < hidden; ++c) gme_e[c] = gagg_i[c] * w;
      }
    }

    // Soft edge weights: sigmoid then the linear head, folded into gme.
    std::vector<double> gpre(edges);
#pragma omp parallel for schedule(static)
    for (int e = 0; e < edges; ++e)
      gpre[e] = ginf[e] * t.inf_val[e] * (1.0 - t.inf_val[e]);
    if (edges > 0) {
      dense_backward_param(ls.inf, t.me.data(), gpre.data(), edges, grad.data());
      const double* winf = theta + ls.inf.w;
#pragma omp parallel for schedule(static)
      for (int e = 0; e < edges; ++e) {
        double* gme_e = gme.data() + static_cast<std::size_t>(e) * hidden;
        for (int c = 0; c < hidden; ++c) gme_e[c] += gpre[e] * winf[c];
      }
    }

    // Edge MLPs share their input rows; both write into one buffer.
    std::vector<double> gein(static_cast<std::size_t>(edges) * ein_cols, 0.0);
    std::vector<double> gein_x(gein.size());
    mlp3_backward(theta, ls.e1, ls.e2, ls.e3, t.ein.data(), t.z1e, t.a1e,
                  t.z2e, t.a2e, gme.data(), edges, gein.data(), grad.data());
    mlp3_backward(theta, ls.x1, ls.x2, ls.x3, t.ein.data(), t.z1x, t.a1x,
                  t.z2x, t.a2x, gsx.data(), edges, gein_x.data(), grad.data());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(gein.size()); ++k)
      gein[k] += gein_x[k];

    // Geometry: d2 enters via the MLP input column and via dist in the
    // normalized difference.
    std::vector<double> gdiff(static_cast<std::size_t>(edges) * 3);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < atoms; ++i) {
      const double* gx_i = gx.data() + static_cast<std::size_t>(i) * 3;
      for (int j = 0; j < atoms; ++j) {
        if (j == i) continue;
        const std::size_t e = edge_index(i, j, atoms);
        const double inv = 1.0 / (t.dist[e] + 1.0);
        const double* de = t.diff.data() + e * 3;
        double gdot = 0.0;
        for (int d = 0; d < 3; ++d) gdot += gx_i[d] * de[d];
        double gd2 = gein[e * ein_cols + 2 * hidden];
        if (t.dist[e] > 0.0) {
          const double gdist = -inv * inv * t.sx[e] * gdot;
          gd2 += gdist / (2.0 * t.dist[e]);
        }
        double* gde = gdiff.data() + e * 3;
        const double s = t.sx[e] * inv;
        for (int d = 0; d < 3; ++d) gde[d] = gx_i[d] * s + 2.0 * de[d] * gd2;
      }
    }

    // Scatter edge gradients back to atoms; fixed neighbor order per atom.
    std::vector<double> gh_prev(static_cast<std::size_t>(atoms) * hidden);
    std::vector<double> gx_prev(static_cast<std::size_t>(atoms) * 3);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < atoms; ++a) {
      double* gha = gh_prev.data() + static_cast<std::size_t>(a) * hidden;
      double* gxa = gx_prev.data() + static_cast<std::size_t>(a) * 3;
      std::memcpy(gha, gh_in.data() + static_cast<std::size_t>(a) * hidden,
                  sizeof(double) * hidden);
      for (int d = 0; d < 3; ++d) gxa[d] = gx[a * 3 + d];
      for (int j = 0; j < atoms; ++j) {  // edges where a is the center
        if (j == a) continue;
        const std::size_t e = edge_index(a, j, atoms);
        const double* ge = gein.data() + e * ein_cols;
        for (int c = 0; c < hidden; ++c) gha[c] += ge[c];
        const double* gde = gdiff.data() + e * 3;
        for (int d = 0; d < 3; ++d) gxa[d] += gde[d];
      }
      for (int i = 0; i < atoms; ++i) {  // edges where a is the neighbor
        if (i == a) continue;
        const std::size_t e = edge_index(i, a, atoms);
        const double* ge = gein.data() + e * ein_cols + hidden;
        for (int c = 0; c < hidden; ++c) gha[c] += ge[c];
        const double* gde = gdiff.data() + e * 3;
        for (int d = 0; d < 3; ++d) gxa[d] -= gde[d];
      }
    }
    gh = std::move(gh_prev);
    gx = std::move(gx_prev);
  }

  // Embedding. The input features are constants, so only parameters remain.
  dense_backward_param(params.layout.embed, tape.feat.data(), gh.data(), atoms,
                       grad.data());
}

}  // namespace ead
