#include "ead/molecule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ead/rng.hpp"

namespace ead {

int Molecule::real_count() const {
  int n = 0;
  for (AtomType t : types)
    if (t != AtomType::Dummy) ++n;
  return n;
}

std::vector<char> Molecule::real_mask() const {
  std::vector<char> mask(types.size());
  for (size_t i = 0; i < types.size(); ++i)
    mask[i] = types[i] != AtomType::Dummy ? 1 : 0;
  return mask;
}

ElementTable ElementTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open element table: " + path);
  ElementTable table;
  std::array<bool, kNumElements> seen{};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    AtomSpec spec;
    if (!(ls >> spec.symbol)) continue;  // blank line
    if (!(ls >> spec.valence >> spec.covalent_radius))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed element entry");
    int idx = -1;
    if (spec.symbol == "H") idx = 0;
    else if (spec.symbol == "C") idx = 1;
    else if (spec.symbol == "N") idx = 2;
    else if (spec.symbol == "O") idx = 3;
    else if (spec.symbol == "F") idx = 4;
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unsupported element " + spec.symbol);
    if (spec.valence < 1 || spec.covalent_radius <= 0.0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": invalid valence or radius");
    table.specs_[idx] = spec;
    seen[idx] = true;
  }
  for (bool s : seen)
    if (!s) throw std::runtime_error("element table incomplete: " + path);
  return table;
}

const AtomSpec& ElementTable::spec(AtomType t) const {
  const int i = static_cast<int>(t);
  if (i < 0 || i >= kNumElements)
    throw std::invalid_argument("ElementTable::spec: not a real element");
  return specs_[i];
}

AtomType ElementTable::from_symbol(const std::string& symbol) const {
  for (int i = 0; i < kNumElements; ++i)
    if (specs_[i].symbol == symbol) return static_cast<AtomType>(i);
  if (symbol == "X") return AtomType::Dummy;
  throw std::runtime_error("unknown element symbol: " + symbol);
}

const std::string& ElementTable::symbol(AtomType t) const {
  static const std::string dummy = "X";
  if (t == AtomType::Dummy) return dummy;
  return spec(t).symbol;
}

std::vector<std::array<double, 3>> center_of_mass_project(
    std::vector<std::array<double, 3>> positions, std::span<const char> mask) {
  if (positions.size() != mask.size())
    throw std::invalid_argument("center_of_mass_project: mask size mismatch");
  double mean[3] = {0, 0, 0};
  int n = 0;
  for (size_t i = 0; i < positions.size(); ++i) {
    if (!mask[i]) continue;
    ++n;
    for (int d = 0; d < 3; ++d) mean[d] += positions[i][d];
  }
  if (n == 0)
    throw std::invalid_argument("center_of_mass_project: empty mask");
  for (int d = 0; d < 3; ++d) mean[d] /= n;
  for (size_t i = 0; i < positions.size(); ++i) {
    if (!mask[i]) continue;
    for (int d = 0; d < 3; ++d) positions[i][d] -= mean[d];
  }
  return positions;
}

std::array<double, kNumAtomTypes> one_hot(AtomType t, double scale) {
  std::array<double, kNumAtomTypes> v{};
  v[static_cast<int>(t)] = scale;
  return v;
}

AtomType argmax_type(std::span<const double> channels) {
  if (channels.size() != kNumAtomTypes)
    throw std::invalid_argument("argmax_type: expected 6 channels");
  int best = 0;
  for (int i = 1; i < kNumAtomTypes; ++i)
    if (channels[i] > channels[best]) best = i;
  return static_cast<AtomType>(best);
}

Molecule strip_dummies(const Molecule& mol) {
  Molecule out;
  for (int i = 0; i < mol.size(); ++i) {
    if (mol.types[i] == AtomType::Dummy) continue;
    out.positions.push_back(mol.positions[i]);
    out.types.push_back(mol.types[i]);
  }
  return out;
}

Molecule pad_molecule(const Molecule& mol, int target_size) {
  if (mol.size() > target_size)
    throw std::invalid_argument("pad_molecule: molecule larger than target");
  Molecule out = mol;
  out.positions.resize(target_size, {0.0, 0.0, 0.0});
  out.types.resize(target_size, AtomType::Dummy);
  return out;
}

namespace {

Molecule normalize(Molecule mol) {
  const auto mask = mol.real_mask();
  bool any = false;
  for (char m : mask) any = any || m;
  if (any) mol.positions = center_of_mass_project(std::move(mol.positions), mask);
  return mol;
}

[[noreturn]] void parse_fail(const std::string& path, int lineno,
                             const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace

Dataset dataset_from_molecules(std::vector<Molecule> mols) {
  Dataset ds;
  for (auto& m : mols) {
    ds.max_size = std::max(ds.max_size, m.real_count());
    for (AtomType t : m.types)
      if (t != AtomType::Dummy) ++ds.element_histogram[static_cast<int>(t)];
  }
  for (auto& m : mols)
    ds.molecules.push_back(pad_molecule(normalize(strip_dummies(m)), ds.max_size));
  return ds;
}

Dataset load_xyz(const std::string& path, const ElementTable& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open xyz file: " + path);

  std::vector<Molecule> mols;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Skip blank padding between frames.
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream cs(line);
    long count;
    if (!(cs >> count) || count < 0) parse_fail(path, lineno, "malformed count line");
    std::string rest;
    if (cs >> rest) parse_fail(path, lineno, "malformed count line");
    if (!std::getline(in, line)) parse_fail(path, lineno + 1, "missing comment line");
    ++lineno;

    Molecule mol;
    for (long a = 0; a < count; ++a) {
      if (!std::getline(in, line)) parse_fail(path, lineno + 1, "unexpected end of frame");
      ++lineno;
      std::istringstream as(line);
      std::string sym;
      double x, y, z;
      if (!(as >> sym)) parse_fail(path, lineno, "missing element symbol");
      AtomType t;
      try {
        t = table.from_symbol(sym);
      } catch (const std::exception&) {
        parse_fail(path, lineno, "unknown element symbol " + sym);
      }
      if (!(as >> x >> y >> z)) parse_fail(path, lineno, "non-numeric coordinate");
      mol.types.push_back(t);
      mol.positions.push_back({x, y, z});
    }
    mols.push_back(std::move(mol));
  }
  if (mols.empty()) throw std::runtime_error(path + ": no frames found");
  return dataset_from_molecules(std::move(mols));
}

void write_xyz(std::ostream& os, std::span<const Molecule> mols,
               const ElementTable& table) {
  char buf[160];
  for (size_t m = 0; m < mols.size(); ++m) {
    const Molecule real = strip_dummies(mols[m]);
    os << real.size() << "\n" << "frame " << m << "\n";
    for (int i = 0; i < real.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s %.6f %.6f %.6f\n",
                    table.symbol(real.types[i]).c_str(), real.positions[i][0],
                    real.positions[i][1], real.positions[i][2]);
      os << buf;
    }
  }
}

const std::vector<Molecule>& toy_templates() {
  static const std::vector<Molecule> templates = [] {
    struct Atom {
      const char* sym;
      std::array<double, 3> p;
    };
    const std::vector<std::vector<Atom>> defs = {
        // methane
        {{"C", {0.000000, 0.000000, 0.000000}},
         {"H", {0.628734, 0.628734, 0.628734}},
         {"H", {0.628734, -0.628734, -0.628734}},
         {"H", {-0.628734, 0.628734, -0.628734}},
         {"H", {-0.628734, -0.628734, 0.628734}}},
        // water
        {{"O", {0.000000, -0.390588, 0.000000}},
         {"H", {0.756950, 0.195294, 0.000000}},
         {"H", {-0.756950, 0.195294, 0.000000}}},
        // ammonia
        {{"N", {0.000000, 0.000000, 0.285771}},
         {"H", {0.937530, 0.000000, -0.095257}},
         {"H", {-0.468765, 0.811924, -0.095257}},
         {"H", {-0.468765, -0.811924, -0.095257}}},
        // ethane, staggered
        {{"C", {0.000000, 0.000000, 0.768000}},
         {"C", {0.000000, 0.000000, -0.768000}},
         {"H", {1.017165, 0.000000, 1.162532}},
         {"H", {-0.508583, 0.880891, 1.162532}},
         {"H", {-0.508583, -0.880891, 1.162532}},
         {"H", {0.508583, 0.880891, -1.162532}},
         {"H", {-1.017165, 0.000000, -1.162532}},
         {"H", {0.508583, -0.880891, -1.162532}}},
        // methanol
        {{"C", {-0.344351, -0.150743, 0.000000}},
         {"O", {1.082649, -0.150743, 0.000000}},
         {"H", {1.392314, 0.753715, 0.000000}},
         {"H", {-0.710204, -1.183878, 0.000000}},
         {"H", {-0.710204, 0.365825, 0.894721}},
         {"H", {-0.710204, 0.365825, -0.894721}}},
    };
    std::vector<Molecule> out;
    for (const auto& def : defs) {
      Molecule mol;
      for (const auto& atom : def) {
        const std::string s = atom.sym;
        AtomType t = s == "H"   ? AtomType::H
                     : s == "C" ? AtomType::C
                     : s == "N" ? AtomType::N
                     : s == "O" ? AtomType::O
                                : AtomType::F;
        mol.types.push_back(t);
        mol.positions.push_back(atom.p);
      }
      out.push_back(normalize(std::move(mol)));
    }
    return out;
  }();
  return templates;
}

Dataset make_toy_dataset(std::uint64_t seed, int n, double jitter) {
  if (n < 1) throw std::invalid_argument("make_toy_dataset: n must be >= 1");
  if (jitter < 0.0 || jitter > 0.02)
    throw std::invalid_argument("make_toy_dataset: jitter must be in [0, 0.02]");
  const auto& templates = toy_templates();
  RngStream rng = substream(seed, "data");
  std::vector<Molecule> mols;
  for (int i = 0; i < n; ++i) {
    Molecule mol = templates[i % templates.size()];
    if (jitter > 0.0) {
      for (auto& p : mol.positions)
        for (int d = 0; d < 3; ++d) p[d] += jitter * rng.normal();
    }
    mols.push_back(std::move(mol));
  }
  return dataset_from_molecules(std::move(mols));
}

}  // namespace ead
