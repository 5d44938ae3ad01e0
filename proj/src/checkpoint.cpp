#include "ead/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace ead {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw CheckpointError(std::string("checkpoint truncated reading ") + what);
  return v;
}

void put_array(std::ostream& os, const std::vector<double>& a) {
  put<std::uint64_t>(os, a.size());
  os.write(reinterpret_cast<const char*>(a.data()),
           static_cast<std::streamsize>(a.size() * sizeof(double)));
}

std::vector<double> get_array(std::istream& is, std::size_t expected,
                              const char* what) {
  const auto n = get<std::uint64_t>(is, what);
  if (n != expected)
    throw CheckpointError(std::string("checkpoint shape mismatch in ") + what);
  std::vector<double> a(n);
  if (!is.read(reinterpret_cast<char*>(a.data()),
               static_cast<std::streamsize>(n * sizeof(double))))
    throw CheckpointError(std::string("checkpoint truncated reading ") + what);
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put<std::int32_t>(os, ckpt.dims.layers);
  put<std::int32_t>(os, ckpt.dims.hidden);
  put<std::int32_t>(os, ckpt.horizon);
  put<std::int32_t>(os, ckpt.max_atoms);
  put(os, ckpt.precision);
  put(os, ckpt.type_scale);
  put<std::int64_t>(os, ckpt.state.step);
  put<std::uint64_t>(os, ckpt.state.seed);
  put_array(os, ckpt.state.params.theta);
  put_array(os, ckpt.state.ema);
  put_array(os, ckpt.state.m);
  put_array(os, ckpt.state.v);
  if (!os) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version in " + path);

  Checkpoint ckpt;
  ckpt.dims.layers = get<std::int32_t>(is, "layers");
  ckpt.dims.hidden = get<std::int32_t>(is, "hidden");
  ckpt.horizon = get<std::int32_t>(is, "horizon");
  ckpt.max_atoms = get<std::int32_t>(is, "max_atoms");
  ckpt.precision = get<double>(is, "precision");
  ckpt.type_scale = get<double>(is, "type_scale");
  if (ckpt.dims.layers < 1 || ckpt.dims.hidden < 1 || ckpt.horizon < 1 ||
      ckpt.max_atoms < 1)
    throw CheckpointError("checkpoint header out of range: " + path);

  ckpt.state.params = make_params(ckpt.dims);
  const std::size_t total = ckpt.state.params.layout.total;
  ckpt.state.step = get<std::int64_t>(is, "step");
  ckpt.state.seed = get<std::uint64_t>(is, "seed");
  ckpt.state.params.theta = get_array(is, total, "theta");
  ckpt.state.ema = get_array(is, total, "ema");
  ckpt.state.m = get_array(is, total, "adam_m");
  ckpt.state.v = get_array(is, total, "adam_v");
  return ckpt;
}

}  // namespace ead
