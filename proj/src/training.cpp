#include "ead/training.hpp"

#include <cmath>
#include <string>

namespace ead {

TrainState make_train_state(const TrainConfig& cfg) {
  TrainState st;
  st.params = make_params(cfg.dims);
  RngStream init_rng = substream(cfg.seed, "init");
  init_params(st.params, init_rng);
  st.ema = st.params.theta;
  st.m.assign(st.params.layout.total, 0.0);
  st.v.assign(st.params.layout.total, 0.0);
  st.seed = cfg.seed;
  return st;
}

namespace {

NoisedSample mix_noise(const Molecule& mol, const TimestepVector& t,
                       const NoiseSchedule& schedule, double type_scale,
                       std::vector<double> eps_pos,
                       std::vector<double> eps_type) {
  const int atoms = mol.size();
  if (static_cast<int>(t.size()) != atoms)
    throw std::invalid_argument("noise_molecule: timestep vector size mismatch");

  NoisedSample out;
  out.real_mask = mol.real_mask();
  detail::project_rows(eps_pos.data(), atoms, out.real_mask);

  out.z.atoms = atoms;
  out.z.horizon = schedule.horizon();
  out.z.t = t;
  out.z.pos.resize(static_cast<std::size_t>(atoms) * 3);
  out.z.type.resize(static_cast<std::size_t>(atoms) * kTypeChannels);
  for (int i = 0; i < atoms; ++i) {
    const double a = schedule.alpha(t[i]);
    const double s = schedule.sigma(t[i]);
    for (int d = 0; d < 3; ++d)
      out.z.pos[i * 3 + d] = a * mol.positions[i][d] + s * eps_pos[i * 3 + d];
    const auto oh = one_hot(mol.types[i], type_scale);
    for (int c = 0; c < kTypeChannels; ++c)
      out.z.type[i * kTypeChannels + c] =
          a * oh[c] + s * eps_type[i * kTypeChannels + c];
  }
  out.eps_pos = std::move(eps_pos);
  out.eps_type = std::move(eps_type);
  return out;
}

}  // namespace

NoisedSample noise_molecule(const Molecule& mol, const TimestepVector& t,
                            const NoiseSchedule& schedule, double type_scale,
                            RngStream& rng) {
  const int atoms = mol.size();
  std::vector<double> eps_pos(static_cast<std::size_t>(atoms) * 3);
  for (auto& e : eps_pos) e = rng.normal();
  std::vector<double> eps_type(static_cast<std::size_t>(atoms) * kTypeChannels);
  for (auto& e : eps_type) e = rng.normal();
  return mix_noise(mol, t, schedule, type_scale, std::move(eps_pos),
                   std::move(eps_type));
}

NoisedSample noise_molecule_with(const Molecule& mol, const TimestepVector& t,
                                 const NoiseSchedule& schedule,
                                 double type_scale,
                                 std::vector<double> eps_pos,
                                 std::vector<double> eps_type) {
  const int atoms = mol.size();
  if (eps_pos.size() != static_cast<std::size_t>(atoms) * 3 ||
      eps_type.size() != static_cast<std::size_t>(atoms) * kTypeChannels)
    throw std::invalid_argument("noise_molecule_with: noise shape mismatch");
  return mix_noise(mol, t, schedule, type_scale, std::move(eps_pos),
                   std::move(eps_type));
}

double loss_diff(std::span<const double> eps_pos_true,
                 std::span<const double> eps_type_true,
                 std::span<const double> eps_pos_pred,
                 std::span<const double> eps_type_pred,
                 std::span<const char> real_mask, double type_weight) {
  std::vector<double> gp, gt;
  // The gradient path tolerates unused outputs; reuse it to stay in sync.
  return loss_diff_grad(eps_pos_true, eps_type_true, eps_pos_pred,
                        eps_type_pred, real_mask, type_weight, gp, gt);
}

double loss_diff_grad(std::span<const double> eps_pos_true,
                      std::span<const double> eps_type_true,
                      std::span<const double> eps_pos_pred,
                      std::span<const double> eps_type_pred,
                      std::span<const char> real_mask, double type_weight,
                      std::vector<double>& g_pos, std::vector<double>& g_type) {
  if (eps_pos_true.size() != eps_pos_pred.size() ||
      eps_type_true.size() != eps_type_pred.size() ||
      eps_pos_true.size() % 3 != 0 ||
      eps_type_true.size() % kTypeChannels != 0)
    throw std::invalid_argument("loss_diff: shape mismatch");
  const int atoms = static_cast<int>(eps_pos_true.size() / 3);
  if (static_cast<int>(eps_type_true.size() / kTypeChannels) != atoms ||
      (!real_mask.empty() && static_cast<int>(real_mask.size()) != atoms))
    throw std::invalid_argument("loss_diff: shape mismatch");

  g_pos.assign(eps_pos_true.size(), 0.0);
  g_type.assign(eps_type_true.size(), 0.0);
  const double inv_m = 1.0 / atoms;
  double loss = 0.0;
  for (int i = 0; i < atoms; ++i) {
    const bool real = real_mask.empty() || real_mask[i];
    if (real) {
      for (int d = 0; d < 3; ++d) {
        const double e = eps_pos_pred[i * 3 + d] - eps_pos_true[i * 3 + d];
        loss += inv_m * e * e;
        g_pos[i * 3 + d] = 2.0 * inv_m * e;
      }
    }
    for (int c = 0; c < kTypeChannels; ++c) {
      const double e =
          eps_type_pred[i * kTypeChannels + c] - eps_type_true[i * kTypeChannels + c];
      loss += inv_m * type_weight * e * e;
      g_type[i * kTypeChannels + c] = 2.0 * inv_m * type_weight * e;
    }
  }
  return loss;
}

double train_step(TrainState& state, const Dataset& data,
                  const TrainConfig& cfg, const NoiseSchedule& schedule) {
  if (data.molecules.empty())
    throw std::invalid_argument("train_step: empty dataset");
  const int batch = cfg.batch_size;
  const int n = static_cast<int>(data.molecules.size());
  const long step = state.step;

  std::vector<int> pick(batch);
  {
    RngStream batch_rng = substream(state.seed, "batch", step);
    for (int b = 0; b < batch; ++b)
      pick[b] = static_cast<int>(batch_rng.uniform_int(0, n - 1));
  }

  std::vector<double> losses(batch, 0.0);
  std::vector<std::vector<double>> grads(
      batch, std::vector<double>(state.params.layout.total, 0.0));

  // Molecules are independent given their derived substreams; the gradient
  // reduction below runs in batch order regardless of thread count.
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    const Molecule& mol = data.molecules[pick[b]];
    const int atoms = mol.size();

    RngStream t_rng = substream(state.seed, "timesteps", step, b);
    TimestepVector t;
    if (cfg.sync_timesteps) {
      t.assign(atoms, static_cast<int>(t_rng.uniform_int(0, cfg.horizon)));
    } else {
      std::vector<char> dummy_mask(atoms);
      for (int i = 0; i < atoms; ++i)
        dummy_mask[i] = mol.types[i] == AtomType::Dummy ? 1 : 0;
      t = sample_training_timesteps(atoms, cfg.horizon, cfg.async, dummy_mask,
                                    t_rng);
    }

    RngStream noise_rng = substream(state.seed, "noise", step, b);
    NoisedSample ns =
        noise_molecule(mol, t, schedule, cfg.type_scale, noise_rng);

    EgnnTape tape;
    std::vector<double> pred_pos, pred_type;
    dynamics_forward_tape(state.params, ns.z, ns.real_mask, tape, pred_pos,
                          pred_type);

    std::vector<double> g_pos, g_type;
    losses[b] = loss_diff_grad(ns.eps_pos, ns.eps_type, pred_pos, pred_type,
                               ns.real_mask, cfg.type_loss_weight, g_pos,
                               g_type);
    dynamics_backward(state.params, tape, g_pos, g_type, grads[b]);
  }

  double loss = 0.0;
  for (int b = 0; b < batch; ++b) loss += losses[b];
  loss /= batch;
  if (!std::isfinite(loss))
    throw TrainError("non-finite loss at step " + std::to_string(step));

  const std::size_t total = state.params.layout.total;
  std::vector<double> grad(total, 0.0);
  for (int b = 0; b < batch; ++b) {
    const auto& g = grads[b];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i)
      grad[i] += g[i];
  }

  const double inv_batch = 1.0 / batch;
  const long next = step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(next));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(next));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    const double g = grad[i] * inv_batch;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    state.params.theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    state.ema[i] =
        cfg.ema_decay * state.ema[i] + (1.0 - cfg.ema_decay) * state.params.theta[i];
  }
  state.step = next;
  return loss;
}

}  // namespace ead
