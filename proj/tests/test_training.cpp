#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ead/training.hpp"

using namespace ead;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.horizon = 50;
  cfg.dims = ModelDims{2, 16};
  cfg.async.C = 4;
  cfg.async.K = 50;
  cfg.async.K_hard_cap = 150;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.seed = 11;
  return cfg;
}

Molecule toy_mol() {
  Molecule mol;
  mol.types = {AtomType::C, AtomType::H, AtomType::H, AtomType::Dummy};
  mol.positions = {{0.0, 0.1, 0.0}, {0.9, 0.0, 0.0}, {-0.9, -0.1, 0.0}, {0, 0, 0}};
  const auto mask = mol.real_mask();
  mol.positions = center_of_mass_project(std::move(mol.positions), mask);
  return mol;
}

}  // namespace

TEST_CASE("noise_molecule") {
  const NoiseSchedule sched(100, 1e-5);
  const Molecule mol = toy_mol();
  const int atoms = mol.size();

  SUBCASE("zero injected noise gives the scaled data exactly") {
    const TimestepVector t(atoms, 37);
    const auto ns = noise_molecule_with(
        mol, t, sched, 1.0, std::vector<double>(atoms * 3, 0.0),
        std::vector<double>(atoms * kTypeChannels, 0.0));
    const double a = sched.alpha(37);
    for (int i = 0; i < atoms; ++i) {
      for (int d = 0; d < 3; ++d)
        CHECK(ns.z.pos[i * 3 + d] == a * mol.positions[i][d]);
      const auto oh = one_hot(mol.types[i]);
      for (int c = 0; c < kTypeChannels; ++c)
        CHECK(ns.z.type[i * kTypeChannels + c] == a * oh[c]);
    }
  }

  SUBCASE("t = 0 stays close to the data") {
    RngStream rng(5);
    const TimestepVector t(atoms, 0);
    const auto ns = noise_molecule(mol, t, sched, 1.0, rng);
    for (int i = 0; i < atoms; ++i)
      for (int d = 0; d < 3; ++d)
        CHECK(std::abs(ns.z.pos[i * 3 + d] - mol.positions[i][d]) < 0.05);
  }

  SUBCASE("real-atom position noise rows sum to zero") {
    RngStream rng(6);
    TimestepVector t(atoms);
    for (int i = 0; i < atoms; ++i) t[i] = 10 + i;
    const auto ns = noise_molecule(mol, t, sched, 1.0, rng);
    double sum[3] = {0, 0, 0};
    for (int i = 0; i < atoms; ++i) {
      if (!ns.real_mask[i]) continue;
      for (int d = 0; d < 3; ++d) sum[d] += ns.eps_pos[i * 3 + d];
    }
    for (int d = 0; d < 3; ++d) CHECK(std::abs(sum[d]) < 1e-12);
  }
}

TEST_CASE("loss_diff") {
  SUBCASE("exact prediction scores zero") {
    const std::vector<double> pos{1, 2, 3}, type{0, 1, 0, 0, 0, 0};
    CHECK(loss_diff(pos, type, pos, type, {}, 1.0) == 0.0);
  }
  SUBCASE("single atom squared norm") {
    const std::vector<double> t_pos{0, 0, 0}, t_type(6, 0.0);
    const std::vector<double> p_pos{1, 2, 2}, p_type(6, 0.0);
    CHECK(loss_diff(t_pos, t_type, p_pos, p_type, {}, 1.0) ==
          doctest::Approx(9.0).epsilon(1e-15));
  }
  SUBCASE("doubling the error quadruples the loss") {
    const std::vector<double> t_pos{0, 0, 0}, t_type(6, 0.0);
    const std::vector<double> p1{0.3, -1, 2}, p2{0.6, -2, 4};
    const double l1 = loss_diff(t_pos, t_type, p1, t_type, {}, 1.0);
    const double l2 = loss_diff(t_pos, t_type, p2, t_type, {}, 1.0);
    CHECK(l2 == doctest::Approx(4.0 * l1).epsilon(1e-12));
  }
  SUBCASE("dummy positions masked, dummy types counted") {
    const std::vector<char> mask{1, 0};  // second atom is a dummy
    const std::vector<double> t_pos(6, 0.0), t_type(12, 0.0);
    std::vector<double> p_pos(6, 0.0), p_type(12, 0.0);
    p_pos[3] = 100.0;  // dummy position error must not count
    CHECK(loss_diff(t_pos, t_type, p_pos, p_type, mask, 1.0) == 0.0);
    p_type[6] = 2.0;  // dummy type error must count: 4 / M with M = 2
    CHECK(loss_diff(t_pos, t_type, p_pos, p_type, mask, 1.0) ==
          doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("type weight scales the type channels") {
    const std::vector<double> t_pos(3, 0.0), t_type(6, 0.0);
    std::vector<double> p_type(6, 0.0);
    p_type[1] = 1.0;
    CHECK(loss_diff(t_pos, t_type, t_pos, p_type, {}, 0.25) ==
          doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("gradient matches finite differences") {
    RngStream rng(8);
    std::vector<double> t_pos(6), t_type(12), p_pos(6), p_type(12);
    for (auto& v : t_pos) v = rng.normal();
    for (auto& v : t_type) v = rng.normal();
    for (auto& v : p_pos) v = rng.normal();
    for (auto& v : p_type) v = rng.normal();
    const std::vector<char> mask{1, 0};
    std::vector<double> g_pos, g_type;
    loss_diff_grad(t_pos, t_type, p_pos, p_type, mask, 0.7, g_pos, g_type);
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      auto pp = p_pos, pm = p_pos;
      pp[k] += h;
      pm[k] -= h;
      const double fd = (loss_diff(t_pos, t_type, pp, p_type, mask, 0.7) -
                         loss_diff(t_pos, t_type, pm, p_type, mask, 0.7)) /
                        (2 * h);
      CHECK(std::abs(fd - g_pos[k]) < 1e-8);
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(loss_diff(std::vector<double>(3), std::vector<double>(6),
                              std::vector<double>(6), std::vector<double>(6),
                              {}, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("train_step") {
  const Dataset data = make_toy_dataset(2, 8, 0.01);
  SUBCASE("zero learning rate leaves parameters unchanged") {
    TrainConfig cfg = small_config();
    cfg.lr = 0.0;
    const NoiseSchedule sched(cfg.horizon, cfg.precision);
    TrainState st = make_train_state(cfg);
    const auto theta0 = st.params.theta;
    const double loss = train_step(st, data, cfg, sched);
    CHECK(loss > 0.0);
    CHECK(st.params.theta == theta0);
    CHECK(st.step == 1);
  }
  SUBCASE("deterministic given the seed") {
    TrainConfig cfg = small_config();
    const NoiseSchedule sched(cfg.horizon, cfg.precision);
    TrainState a = make_train_state(cfg);
    TrainState b = make_train_state(cfg);
    for (int i = 0; i < 3; ++i) {
      const double la = train_step(a, data, cfg, sched);
      const double lb = train_step(b, data, cfg, sched);
      CHECK(la == lb);
    }
    CHECK(a.params.theta == b.params.theta);
    CHECK(a.ema == b.ema);
  }
  SUBCASE("EMA tracks parameters exactly at decay zero") {
    TrainConfig cfg = small_config();
    cfg.ema_decay = 0.0;
    const NoiseSchedule sched(cfg.horizon, cfg.precision);
    TrainState st = make_train_state(cfg);
    train_step(st, data, cfg, sched);
    CHECK(st.ema == st.params.theta);
  }
  SUBCASE("non-finite loss raises a training error") {
    TrainConfig cfg = small_config();
    const NoiseSchedule sched(cfg.horizon, cfg.precision);
    TrainState st = make_train_state(cfg);
    st.params.theta[0] = std::nan("");
    CHECK_THROWS_AS(train_step(st, data, cfg, sched), TrainError);
  }
}

TEST_CASE("C = 0 training equals the synchronous code path") {
  const Dataset data = make_toy_dataset(3, 6, 0.01);
  TrainConfig async_cfg = small_config();
  async_cfg.async.C = 0;
  TrainConfig sync_cfg = async_cfg;
  sync_cfg.sync_timesteps = true;

  const NoiseSchedule sched(async_cfg.horizon, async_cfg.precision);
  TrainState a = make_train_state(async_cfg);
  TrainState b = make_train_state(sync_cfg);
  for (int i = 0; i < 10; ++i) {
    const double la = train_step(a, data, async_cfg, sched);
    const double lb = train_step(b, data, sync_cfg, sched);
    CHECK(la == lb);  // bitwise identical trajectories
  }
  CHECK(a.params.theta == b.params.theta);
}

TEST_CASE("loss is invariant to global rotation") {
  // Equivariant model + rotated noise target: rotating the molecule and the
  // injected position noise leaves the loss unchanged.
  const NoiseSchedule sched(50, 1e-5);
  EGNNParams params = make_params({2, 16});
  RngStream rng(77);
  init_params(params, rng, /*zero_coord_head=*/false);

  Molecule mol = toy_mol();
  const int atoms = mol.size();
  TimestepVector t(atoms, 25);
  std::vector<double> eps_pos(atoms * 3), eps_type(atoms * kTypeChannels);
  for (auto& v : eps_pos) v = rng.normal();
  for (auto& v : eps_type) v = rng.normal();

  // Rotation about z by a fixed angle.
  const double c = std::cos(0.83), s = std::sin(0.83);
  auto rot = [&](const std::array<double, 3>& p) {
    return std::array<double, 3>{c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
  };

  Molecule mol_rot = mol;
  for (auto& p : mol_rot.positions) p = rot(p);
  std::vector<double> eps_pos_rot(eps_pos.size());
  for (int i = 0; i < atoms; ++i) {
    const auto r = rot({eps_pos[i * 3], eps_pos[i * 3 + 1], eps_pos[i * 3 + 2]});
    for (int d = 0; d < 3; ++d) eps_pos_rot[i * 3 + d] = r[d];
  }

  auto loss_of = [&](const Molecule& m, std::vector<double> ep) {
    const auto ns = noise_molecule_with(m, t, sched, 1.0, std::move(ep), eps_type);
    std::vector<double> pred_pos, pred_type;
    dynamics_forward(params, ns.z, ns.real_mask, {}, pred_pos, pred_type);
    return loss_diff(ns.eps_pos, ns.eps_type, pred_pos, pred_type, ns.real_mask,
                     1.0);
  };
  const double l0 = loss_of(mol, eps_pos);
  const double l1 = loss_of(mol_rot, eps_pos_rot);
  CHECK(std::abs(l0 - l1) < 1e-6);
}
