#include "ead/config.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace ead {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": " + v);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "horizon" || key == "T") horizon = static_cast<int>(to_long(key, value));
  else if (key == "precision") precision = to_double(key, value);
  else if (key == "layers") layers = static_cast<int>(to_long(key, value));
  else if (key == "hidden") hidden = static_cast<int>(to_long(key, value));
  else if (key == "C") C = static_cast<int>(to_long(key, value));
  else if (key == "dummy_bias") dummy_bias = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "window" || key == "w") window = static_cast<int>(to_long(key, value));
  else if (key == "K") K = to_long(key, value);
  else if (key == "K_hard_cap") K_hard_cap = to_long(key, value);
  else if (key == "batch_size") batch_size = static_cast<int>(to_long(key, value));
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "beta1") beta1 = to_double(key, value);
  else if (key == "beta2") beta2 = to_double(key, value);
  else if (key == "adam_eps") adam_eps = to_double(key, value);
  else if (key == "ema_decay") ema_decay = to_double(key, value);
  else if (key == "steps") steps = static_cast<int>(to_long(key, value));
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(key, value));
  else if (key == "type_loss_weight") type_loss_weight = to_double(key, value);
  else if (key == "type_scale") type_scale = to_double(key, value);
  else if (key == "sync_timesteps") sync_timesteps = to_bool(key, value);
  else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(to_long(key, value));
  else if (key == "dataset") dataset = value;
  else if (key == "toy_n") toy_n = static_cast<int>(to_long(key, value));
  else if (key == "jitter") jitter = to_double(key, value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "sample_n") sample_n = static_cast<int>(to_long(key, value));
  else if (key == "sample_mode") sample_mode = value;
  else if (key == "manual_u") manual_u = static_cast<int>(to_long(key, value));
  else if (key == "max_atoms") max_atoms = static_cast<int>(to_long(key, value));
  else throw ConfigError("config: unknown key " + key);
}

void RunConfig::resolve(int dataset_max_size) {
  if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
  if (C < 0) C = dataset_max_size;
  if (K < 0) K = horizon;
  if (K_hard_cap < 0) K_hard_cap = 3l * horizon;
  if (sample_mode != "adaptive" && sample_mode != "sync" &&
      sample_mode != "manual")
    throw ConfigError("config: sample_mode must be adaptive, sync or manual");
  async_config().validate();
}

AsyncConfig RunConfig::async_config() const {
  AsyncConfig a;
  a.C = C < 0 ? 0 : C;
  a.dummy_bias = dummy_bias;
  a.lambda = lambda;
  a.w = window;
  a.K = K < 0 ? horizon : K;
  a.K_hard_cap = K_hard_cap < 0 ? 3l * horizon : K_hard_cap;
  return a;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.horizon = horizon;
  t.precision = precision;
  t.dims = ModelDims{layers, hidden};
  t.async = async_config();
  t.sync_timesteps = sync_timesteps;
  t.batch_size = batch_size;
  t.lr = lr;
  t.beta1 = beta1;
  t.beta2 = beta2;
  t.adam_eps = adam_eps;
  t.ema_decay = ema_decay;
  t.type_loss_weight = type_loss_weight;
  t.type_scale = type_scale;
  t.seed = seed;
  return t;
}

void RunConfig::write(std::ostream& os) const {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "horizon = " << horizon << "\n"
     << "precision = " << num(precision) << "\n"
     << "layers = " << layers << "\n"
     << "hidden = " << hidden << "\n"
     << "C = " << C << "\n"
     << "dummy_bias = " << num(dummy_bias) << "\n"
     << "lambda = " << num(lambda) << "\n"
     << "window = " << window << "\n"
     << "K = " << K << "\n"
     << "K_hard_cap = " << K_hard_cap << "\n"
     << "batch_size = " << batch_size << "\n"
     << "lr = " << num(lr) << "\n"
     << "beta1 = " << num(beta1) << "\n"
     << "beta2 = " << num(beta2) << "\n"
     << "adam_eps = " << num(adam_eps) << "\n"
     << "ema_decay = " << num(ema_decay) << "\n"
     << "steps = " << steps << "\n"
     << "seed = " << seed << "\n"
     << "type_loss_weight = " << num(type_loss_weight) << "\n"
     << "type_scale = " << num(type_scale) << "\n"
     << "sync_timesteps = " << (sync_timesteps ? 1 : 0) << "\n"
     << "checkpoint_every = " << checkpoint_every << "\n"
     << "dataset = " << dataset << "\n"
     << "toy_n = " << toy_n << "\n"
     << "jitter = " << num(jitter) << "\n"
     << "data_dir = " << data_dir << "\n"
     << "sample_n = " << sample_n << "\n"
     << "sample_mode = " << sample_mode << "\n"
     << "manual_u = " << manual_u << "\n"
     << "max_atoms = " << max_atoms << "\n";
}

}  // namespace ead
