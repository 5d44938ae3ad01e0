#include "ead/sampler.hpp"

#include <algorithm>
#include <stdexcept>

namespace ead {

namespace {

std::vector<double> latent_velocity(const LatentState& prev,
                                    const LatentState& curr) {
  auto vel = velocity(prev.pos, curr.pos, prev.atoms);
  const auto vel_type = velocity(prev.type, curr.type, prev.atoms);
  for (int i = 0; i < prev.atoms; ++i) vel[i] += vel_type[i];
  return vel;
}

enum class Mode { Adaptive, Synchronous, Manual };

Molecule run_chain(const EGNNParams& params, int max_atoms,
                   const AsyncConfig& cfg, int manual_u,
                   const NoiseSchedule& schedule, RngStream& rng, Mode mode,
                   SampleStats* stats, ChainTrace* trace) {
  if (max_atoms < 1)
    throw std::invalid_argument("sample: max_atoms must be >= 1");
  cfg.validate();
  const int T = schedule.horizon();
  const int atoms = max_atoms;

  // z^K from the standard normal, positions projected to zero CoM.
  LatentState z;
  z.atoms = atoms;
  z.horizon = T;
  z.pos.resize(static_cast<std::size_t>(atoms) * 3);
  for (auto& p : z.pos) p = rng.normal();
  detail::project_rows(z.pos.data(), atoms, {});
  z.type.resize(static_cast<std::size_t>(atoms) * kTypeChannels);
  for (auto& c : z.type) c = rng.normal();
  z.t.assign(atoms, T);

  std::vector<TimestepVector> manual_rows;
  if (mode == Mode::Manual) manual_rows = pyramid_schedule(T, atoms, manual_u);

  // Records start one above the horizon; the first advance lands at T while
  // the latent is still pure level-T noise, so iteration 0 is a bookkeeping
  // step with no model evaluation. Manual mode starts at the first matrix row.
  TimestepVector t_rec(atoms, T + 1);
  if (mode == Mode::Manual) t_rec = manual_rows[0];

  VelocityHistory history(atoms, cfg.w);
  std::vector<double> pending_vel;  // last velocity, not yet in the window

  SampleStats local_stats;
  SampleStats& st = stats ? *stats : local_stats;
  st = SampleStats{};

  // Force synchronous advancement early enough that the run always finishes
  // within the hard cap.
  const long force_at = cfg.K_hard_cap - static_cast<long>(T) - 2;

  long k = cfg.K;
  long e = 0;
  std::size_t manual_next = 1;
  while (true) {
    bool done = true;
    for (int ti : t_rec) done = done && ti == 0;
    if (done) break;
    if (mode == Mode::Manual && manual_next >= manual_rows.size()) break;

    std::vector<std::uint8_t> v;
    TimestepVector t_next;
    if (mode == Mode::Manual) {
      const TimestepVector& row = manual_rows[manual_next];
      v.resize(atoms);
      for (int i = 0; i < atoms; ++i)
        v[i] = static_cast<std::uint8_t>(t_rec[i] - row[i]);
      t_next = row;
      ++manual_next;
    } else if (mode == Mode::Synchronous) {
      v.assign(atoms, 1);
    } else {
      if (e >= force_at) {
        v.assign(atoms, 1);
        st.hit_cap = true;
      } else if (pending_vel.empty()) {
        v = advance_decision(k, cfg, history, std::vector<double>(atoms, 0.0));
      } else {
        v = advance_decision(k, cfg, history, pending_vel);
      }
    }
    if (!pending_vel.empty()) history.push(pending_vel);

    TimestepVector from(atoms), to(atoms);
    for (int i = 0; i < atoms; ++i) {
      from[i] = std::min(t_rec[i], T);
      to[i] = std::max(t_rec[i] - static_cast<int>(v[i]), 0);
    }

    const LatentState prev = z;
    z = denoise_step(z, from, to, params, schedule, rng, &st.model_evals);
    pending_vel = latent_velocity(prev, z);

    if (mode == Mode::Manual)
      t_rec = t_next;
    else
      t_rec = apply_advance(t_rec, v, T, cfg);

    if (trace) {
      trace->t_rows.push_back(t_rec);
      trace->velocities.push_back(pending_vel);
      trace->steps.emplace_back(from, to);
    }

    --k;
    ++e;
    ++st.iterations;
    if (e >= cfg.K_hard_cap) break;  // unconditional liveness guard
  }

  return decode_latent(z);
}

}  // namespace

LatentState denoise_step(const LatentState& z, const TimestepVector& t,
                         const TimestepVector& s, const EGNNParams& params,
                         const NoiseSchedule& schedule, RngStream& rng,
                         long* model_evals) {
  z.check();
  const int atoms = z.atoms;
  if (static_cast<int>(t.size()) != atoms || static_cast<int>(s.size()) != atoms)
    throw std::invalid_argument("denoise_step: timestep size mismatch");

  std::vector<char> frozen(atoms), unfrozen(atoms);
  bool any_update = false;
  for (int i = 0; i < atoms; ++i) {
    if (s[i] > t[i] || t[i] - s[i] > 1)
      throw std::invalid_argument("denoise_step: requires s in [t-1, t]");
    frozen[i] = t[i] == 0 ? 1 : 0;
    unfrozen[i] = !frozen[i];
    any_update = any_update || (!frozen[i] && s[i] < t[i]);
  }

  LatentState out = z;
  out.t = t;

  std::vector<double> eps_pos, eps_type;
  if (any_update) {
    LatentState cond = z;
    cond.t = t;
    dynamics_forward(params, cond, unfrozen, frozen, eps_pos, eps_type);
    if (model_evals) ++(*model_evals);
  }

  bool any_unfrozen = false;
  for (int i = 0; i < atoms; ++i) {
    if (!unfrozen[i]) continue;
    any_unfrozen = true;
    if (s[i] == t[i]) continue;  // paused: deterministic identity, no noise
    const TransitionCoeffs tc = schedule.transition(t[i], s[i]);
    const double inv_a = 1.0 / tc.alpha_ts;
    const double noise_coef =
        tc.sigma_ts_sq / (tc.alpha_ts * schedule.sigma(t[i]));
    for (int d = 0; d < 3; ++d) {
      const std::size_t idx = static_cast<std::size_t>(i) * 3 + d;
      out.pos[idx] = inv_a * z.pos[idx] - noise_coef * eps_pos[idx] +
                     tc.sigma_t_to_s * rng.normal();
    }
    for (int c = 0; c < kTypeChannels; ++c) {
      const std::size_t idx = static_cast<std::size_t>(i) * kTypeChannels + c;
      out.type[idx] = inv_a * z.type[idx] - noise_coef * eps_type[idx] +
                      tc.sigma_t_to_s * rng.normal();
    }
  }

  if (any_unfrozen) detail::project_rows(out.pos.data(), atoms, unfrozen);
  return out;
}

Molecule decode_latent(const LatentState& z, double type_scale) {
  (void)type_scale;  // argmax is scale-invariant
  Molecule mol;
  for (int i = 0; i < z.atoms; ++i) {
    const AtomType ty = argmax_type(std::span<const double>(
        z.type.data() + static_cast<std::size_t>(i) * kTypeChannels,
        kTypeChannels));
    if (ty == AtomType::Dummy) continue;
    mol.types.push_back(ty);
    mol.positions.push_back(
        {z.pos[i * 3 + 0], z.pos[i * 3 + 1], z.pos[i * 3 + 2]});
  }
  if (mol.size() > 0)
    mol.positions = center_of_mass_project(std::move(mol.positions),
                                           std::vector<char>(mol.size(), 1));
  return mol;
}

Molecule sample(const EGNNParams& params, int max_atoms, const AsyncConfig& cfg,
                const NoiseSchedule& schedule, RngStream& rng,
                SampleStats* stats, ChainTrace* trace) {
  return run_chain(params, max_atoms, cfg, 1, schedule, rng, Mode::Adaptive,
                   stats, trace);
}

Molecule sample_synchronous(const EGNNParams& params, int max_atoms,
                            const NoiseSchedule& schedule, RngStream& rng,
                            SampleStats* stats, ChainTrace* trace) {
  AsyncConfig cfg;
  cfg.C = schedule.horizon();  // spread stays zero; the clamp is inert
  cfg.lambda = 1.0;
  cfg.w = 1;
  cfg.K = schedule.horizon();
  cfg.K_hard_cap = 3l * schedule.horizon() + 3;
  return run_chain(params, max_atoms, cfg, 1, schedule, rng, Mode::Synchronous,
                   stats, trace);
}

Molecule sample_manual(const EGNNParams& params, int max_atoms, int u,
                       const NoiseSchedule& schedule, RngStream& rng,
                       SampleStats* stats, ChainTrace* trace) {
  AsyncConfig cfg;
  cfg.C = schedule.horizon();
  cfg.lambda = 1.0;
  cfg.w = 1;
  cfg.K = schedule.horizon();
  cfg.K_hard_cap =
      3l * schedule.horizon() + static_cast<long>(max_atoms) + 3;
  return run_chain(params, max_atoms, cfg, u, schedule, rng, Mode::Manual,
                   stats, trace);
}

}  // namespace ead
