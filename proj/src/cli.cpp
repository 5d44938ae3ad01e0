#include "ead/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ead/checkpoint.hpp"
#include "ead/metrics.hpp"
#include "ead/sampler.hpp"

namespace ead {

namespace fs = std::filesystem;

std::string resolve_run_path(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("EAD_RUN_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

namespace {

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "toy")
    return make_toy_dataset(cfg.seed, cfg.toy_n, cfg.jitter);
  const ElementTable elements =
      ElementTable::load((fs::path(cfg.data_dir) / "elements.txt").string());
  return load_xyz(cfg.dataset, elements);
}

void write_trace_csv(const std::string& path, const ChainTrace& trace) {
  std::ofstream os(path);
  os << "iteration,atom,t,velocity\n";
  char buf[96];
  for (std::size_t it = 0; it < trace.t_rows.size(); ++it) {
    const auto& row = trace.t_rows[it];
    for (std::size_t a = 0; a < row.size(); ++a) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%d,%.17g\n", it, a, row[a],
                    trace.velocities[it][a]);
      os << buf;
    }
  }
}

}  // namespace

int cmd_train(RunConfig cfg, const std::string& out_dir,
              const std::string& resume_path) {
  try {
    Dataset data = load_dataset(cfg);
    cfg.resolve(data.max_size);

    const fs::path run_dir = resolve_run_path(out_dir);
    fs::create_directories(run_dir);
    {
      std::ofstream frozen(run_dir / "config.resolved");
      cfg.write(frozen);
    }

    const TrainConfig tcfg = cfg.train_config();
    const NoiseSchedule schedule(tcfg.horizon, tcfg.precision);

    TrainState state;
    if (!resume_path.empty()) {
      Checkpoint ckpt = load_checkpoint(resume_path);
      if (ckpt.dims != tcfg.dims || ckpt.horizon != tcfg.horizon)
        throw CheckpointError("resume checkpoint does not match configuration");
      state = std::move(ckpt.state);
    } else {
      state = make_train_state(tcfg);
    }

    auto save = [&](const std::string& name) {
      Checkpoint ckpt;
      ckpt.dims = tcfg.dims;
      ckpt.horizon = tcfg.horizon;
      ckpt.max_atoms = data.max_size;
      ckpt.precision = tcfg.precision;
      ckpt.type_scale = tcfg.type_scale;
      ckpt.state = state;
      save_checkpoint((run_dir / name).string(), ckpt);
    };

    std::ofstream log(run_dir / "train_log.csv");
    log << "step,loss,smoothed\n";
    std::deque<double> window;
    double window_sum = 0.0;
    char buf[96];
    const long target = state.step + cfg.steps;
    while (state.step < target) {
      const double loss = train_step(state, data, tcfg, schedule);
      window.push_back(loss);
      window_sum += loss;
      if (window.size() > 100) {
        window_sum -= window.front();
        window.pop_front();
      }
      const double smoothed = window_sum / static_cast<double>(window.size());
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", state.step, loss,
                    smoothed);
      log << buf;
      if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
        std::snprintf(buf, sizeof(buf), "model_step%06ld.ckpt", state.step);
        save(buf);
      }
    }
    save("model_final.ckpt");
    return kExitOk;
  } catch (const TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_sample(const RunConfig& cfg_in, const std::string& checkpoint_path,
               const std::string& out_path, const std::string& traj_prefix,
               bool use_raw_params) {
  try {
    Checkpoint ckpt;
    try {
      ckpt = load_checkpoint(checkpoint_path);
    } catch (const CheckpointError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitCheckpoint;
    }

    RunConfig cfg = cfg_in;
    cfg.horizon = ckpt.horizon;
    cfg.precision = ckpt.precision;
    cfg.layers = ckpt.dims.layers;
    cfg.hidden = ckpt.dims.hidden;
    cfg.resolve(ckpt.max_atoms);
    if (cfg.sample_n < 1) throw ConfigError("sample: n must be >= 1");

    EGNNParams params = std::move(ckpt.state.params);
    if (!use_raw_params) params.theta = ckpt.state.ema;

    const NoiseSchedule schedule(cfg.horizon, cfg.precision);
    const AsyncConfig async = cfg.async_config();
    const int max_atoms = cfg.max_atoms > 0 ? cfg.max_atoms : ckpt.max_atoms;
    const int n = cfg.sample_n;
    const bool want_trace = !traj_prefix.empty();

    std::vector<Molecule> mols(n);
    std::vector<ChainTrace> traces(want_trace ? n : 0);
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n; ++c) {
      RngStream rng = substream(cfg.seed, "sampling", c);
      ChainTrace* trace = want_trace ? &traces[c] : nullptr;
      if (cfg.sample_mode == "sync")
        mols[c] = sample_synchronous(params, max_atoms, schedule, rng, nullptr,
                                     trace);
      else if (cfg.sample_mode == "manual")
        mols[c] = sample_manual(params, max_atoms, cfg.manual_u, schedule, rng,
                                nullptr, trace);
      else
        mols[c] = sample(params, max_atoms, async, schedule, rng, nullptr, trace);
    }

    const ElementTable elements =
        ElementTable::load((fs::path(cfg.data_dir) / "elements.txt").string());
    const std::string resolved_out = resolve_run_path(out_path);
    if (const fs::path parent = fs::path(resolved_out).parent_path();
        !parent.empty())
      fs::create_directories(parent);
    std::ofstream os(resolved_out);
    if (!os) throw ConfigError("cannot write samples to " + resolved_out);
    write_xyz(os, mols, elements);

    if (want_trace)
      for (int c = 0; c < n; ++c)
        write_trace_csv(resolve_run_path(traj_prefix) + "_chain" +
                            std::to_string(c) + ".csv",
                        traces[c]);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_eval(const std::string& xyz_path, const std::string& out_json,
             const std::string& out_csv, const std::string& data_dir) {
  try {
    const ElementTable elements =
        ElementTable::load((fs::path(data_dir) / "elements.txt").string());
    const BondTable bonds =
        BondTable::load((fs::path(data_dir) / "bonds.txt").string(), elements);
    const Dataset ds = load_xyz(xyz_path, elements);
    const EvalReport rep = evaluate(ds.molecules, bonds, elements);

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "atom_stability %.4f\nmol_stability  %.4f\nvalidity       "
                  "%.4f\nv_times_u      %.4f\n",
                  rep.atom_stability, rep.mol_stability, rep.validity,
                  rep.v_times_u);
    std::cout << buf;

    if (!out_json.empty()) {
      std::ofstream os(resolve_run_path(out_json));
      os << report_to_json(rep) << "\n";
    }
    if (!out_csv.empty()) {
      std::ofstream os(resolve_run_path(out_csv));
      write_diagnostics_csv(os, ds.molecules, bonds, elements);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

namespace {

int dump_to(const std::string& out, const std::function<void(std::ostream&)>& fn) {
  if (out.empty()) {
    fn(std::cout);
    return kExitOk;
  }
  std::ofstream os(resolve_run_path(out));
  if (!os) {
    std::cerr << "error: cannot write " << out << "\n";
    return kExitUsage;
  }
  fn(os);
  return kExitOk;
}

}  // namespace

int cmd_schedule_dump(int horizon, double precision, const std::string& out) {
  try {
    const NoiseSchedule schedule(horizon, precision);
    return dump_to(out, [&](std::ostream& os) { schedule.write_csv(os); });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_pyramid_dump(int horizon, int atoms, int u, const std::string& out) {
  try {
    const auto rows = pyramid_schedule(horizon, atoms, u);
    return dump_to(out, [&](std::ostream& os) {
      for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
          os << row[i] << (i + 1 < row.size() ? "," : "");
        os << "\n";
      }
    });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace ead
