#include "ead/asynctime.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ead {

void AsyncConfig::validate() const {
  if (C < 0) throw std::invalid_argument("AsyncConfig: C must be >= 0");
  if (dummy_bias < 0.0 || dummy_bias > 1.0)
    throw std::invalid_argument("AsyncConfig: dummy_bias must be in [0, 1]");
  if (!(lambda > 0.0) || lambda > 1.0)
    throw std::invalid_argument("AsyncConfig: lambda must be in (0, 1]");
  if (w < 1) throw std::invalid_argument("AsyncConfig: w must be >= 1");
  if (K_hard_cap < K)
    throw std::invalid_argument("AsyncConfig: K_hard_cap must be >= K");
}

VelocityHistory::VelocityHistory(int atoms, int window)
    : atoms_(atoms), window_(window) {
  if (atoms < 1 || window < 1)
    throw std::invalid_argument("VelocityHistory: atoms and window must be >= 1");
  buf_.assign(static_cast<size_t>(atoms) * window, 0.0);
}

void VelocityHistory::push(std::span<const double> velocities) {
  if (static_cast<int>(velocities.size()) != atoms_)
    throw std::invalid_argument("VelocityHistory::push: size mismatch");
  for (int a = 0; a < atoms_; ++a)
    buf_[static_cast<size_t>(a) * window_ + next_] = velocities[a];
  next_ = (next_ + 1) % window_;
  count_ = std::min(count_ + 1, window_);
}

double VelocityHistory::min_of(int atom) const {
  if (atom < 0 || atom >= atoms_)
    throw std::invalid_argument("VelocityHistory::min_of: atom out of range");
  double m = std::numeric_limits<double>::infinity();
  for (int s = 0; s < count_; ++s)
    m = std::min(m, buf_[static_cast<size_t>(atom) * window_ + s]);
  return m;
}

int sample_offset(bool is_dummy, const AsyncConfig& cfg, RngStream& rng) {
  if (cfg.C == 0) return 0;
  if (is_dummy && rng.uniform() < cfg.dummy_bias)
    return static_cast<int>(rng.uniform_int(0, cfg.C));
  return static_cast<int>(rng.uniform_int(-cfg.C, cfg.C));
}

TimestepVector sample_training_timesteps(int atoms, int horizon,
                                         const AsyncConfig& cfg,
                                         std::span<const char> dummy_mask,
                                         RngStream& rng) {
  if (atoms < 1) throw std::invalid_argument("sample_training_timesteps: atoms < 1");
  if (!dummy_mask.empty() && static_cast<int>(dummy_mask.size()) != atoms)
    throw std::invalid_argument("sample_training_timesteps: dummy mask size mismatch");
  const int base = static_cast<int>(rng.uniform_int(0, horizon));
  TimestepVector t(atoms);
  for (int i = 0; i < atoms; ++i) {
    const bool dummy = !dummy_mask.empty() && dummy_mask[i];
    const int off = sample_offset(dummy, cfg, rng);
    t[i] = std::clamp(base + off, 0, horizon);
  }
  return t;
}

std::vector<double> velocity(std::span<const double> prev,
                             std::span<const double> curr, int atoms) {
  if (prev.size() != curr.size() || atoms < 1 || prev.size() % atoms != 0)
    throw std::invalid_argument("velocity: shape mismatch");
  const size_t channels = prev.size() / atoms;
  std::vector<double> out(atoms, 0.0);
  for (int a = 0; a < atoms; ++a) {
    double sum = 0.0;
    for (size_t c = 0; c < channels; ++c) {
      const double d = curr[a * channels + c] - prev[a * channels + c];
      sum += d * d;
    }
    out[a] = sum;
  }
  return out;
}

std::vector<std::uint8_t> compare(const VelocityHistory& history,
                                  std::span<const double> h_star) {
  if (static_cast<int>(h_star.size()) != history.atoms())
    throw std::invalid_argument("compare: size mismatch");
  std::vector<std::uint8_t> v(h_star.size());
  for (int a = 0; a < history.atoms(); ++a)
    v[a] = (history.empty(a) || h_star[a] <= history.min_of(a)) ? 1 : 0;
  return v;
}

bool synchronous_phase(long k, const AsyncConfig& cfg) {
  // k counts down from K; the warm-up covers the first ceil(lambda*K) + 1
  // iterations so that lambda = 1 keeps a full synchronous pass (including
  // the final step to level 0) in phase 1.
  return static_cast<double>(k) >= (1.0 - cfg.lambda) * static_cast<double>(cfg.K);
}

std::vector<std::uint8_t> advance_decision(long k, const AsyncConfig& cfg,
                                           const VelocityHistory& history,
                                           std::span<const double> h_star) {
  if (synchronous_phase(k, cfg))
    return std::vector<std::uint8_t>(history.atoms(), 1);
  return compare(history, h_star);
}

TimestepVector apply_advance(const TimestepVector& t,
                             std::span<const std::uint8_t> v, int horizon,
                             const AsyncConfig& cfg) {
  if (t.size() != v.size())
    throw std::invalid_argument("apply_advance: size mismatch");
  TimestepVector out(t.size());
  int lo = std::numeric_limits<int>::max();
  for (size_t i = 0; i < t.size(); ++i) {
    out[i] = std::clamp(t[i] - static_cast<int>(v[i]), 0, horizon);
    lo = std::min(lo, out[i]);
  }
  // Keep the spread within the interval the model was trained on. Atoms far
  // above the molecule minimum are forcibly advanced.
  const long hi = static_cast<long>(lo) + 2l * cfg.C;
  for (auto& ti : out)
    if (ti > hi) ti = static_cast<int>(hi);
  return out;
}

TimestepVector advance_timesteps(const TimestepVector& t, long k,
                                 const AsyncConfig& cfg,
                                 const VelocityHistory& history,
                                 std::span<const double> h_star, int horizon) {
  const auto v = advance_decision(k, cfg, history, h_star);
  return apply_advance(t, v, horizon, cfg);
}

std::vector<TimestepVector> pyramid_schedule(int horizon, int atoms, int u) {
  if (horizon < 1 || atoms < 1 || u < 1)
    throw std::invalid_argument("pyramid_schedule: T, M, u must all be >= 1");
  const int windows = (atoms + u - 1) / u;
  std::vector<TimestepVector> rows;
  rows.reserve(horizon + windows);
  for (int r = 0; r < horizon + windows; ++r) {
    TimestepVector row(atoms);
    for (int i = 0; i < atoms; ++i)
      row[i] = std::clamp(horizon - r + i / u, 0, horizon);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ead
