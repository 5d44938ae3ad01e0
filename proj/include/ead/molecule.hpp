#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ead {

// Categorical atom labels. Dummy is the padding category that doubles as the
// generated stop signal deciding molecule size.
enum class AtomType : int { H = 0, C = 1, N = 2, O = 3, F = 4, Dummy = 5 };

inline constexpr int kNumAtomTypes = 6;   // 5 elements + dummy
inline constexpr int kNumElements = 5;

struct AtomSpec {
  std::string symbol;
  int valence = 0;
  double covalent_radius = 0.0;  // Angstrom
};

// Element properties (symbol, target valence, covalent radius) loaded from a
// plain-text data file: one "symbol valence radius" line per element.
class ElementTable {
 public:
  static ElementTable load(const std::string& path);

  const AtomSpec& spec(AtomType t) const;
  // Returns Dummy for the literal symbol "X"; throws on unknown symbols.
  AtomType from_symbol(const std::string& symbol) const;
  const std::string& symbol(AtomType t) const;

 private:
  std::array<AtomSpec, kNumElements> specs_;
};

struct Molecule {
  std::vector<std::array<double, 3>> positions;  // Angstrom
  std::vector<AtomType> types;

  int size() const { return static_cast<int>(types.size()); }
  int real_count() const;
  std::vector<char> real_mask() const;  // 1 for non-dummy atoms
};

struct Dataset {
  std::vector<Molecule> molecules;  // all padded to max_size
  int max_size = 0;
  std::array<std::int64_t, kNumElements> element_histogram{};
};

// Subtracts the mean of masked rows from masked rows; unmasked rows are left
// untouched. Throws if the mask has no true entry.
std::vector<std::array<double, 3>> center_of_mass_project(
    std::vector<std::array<double, 3>> positions, std::span<const char> mask);

// One-hot over the 6 categories, scaled by `scale` (knob, default 1).
std::array<double, kNumAtomTypes> one_hot(AtomType t, double scale = 1.0);
AtomType argmax_type(std::span<const double> channels);

Molecule strip_dummies(const Molecule& mol);
Molecule pad_molecule(const Molecule& mol, int target_size);

// Multi-frame XYZ: count line, comment line, then "symbol x y z" rows.
// Every molecule is CoM-normalized over real atoms and padded to the largest
// frame. Parse failures name the offending line.
Dataset load_xyz(const std::string& path, const ElementTable& table);
Dataset dataset_from_molecules(std::vector<Molecule> mols);
void write_xyz(std::ostream& os, std::span<const Molecule> mols,
               const ElementTable& table);

// Five fixed template molecules (methane, water, ammonia, ethane, methanol)
// with literature geometries, already CoM-centered, unpadded.
const std::vector<Molecule>& toy_templates();

// n molecules cycling through the templates with Gaussian coordinate jitter
// (at most 0.02 A), deterministic given the seed.
Dataset make_toy_dataset(std::uint64_t seed, int n, double jitter = 0.01);

}  // namespace ead
