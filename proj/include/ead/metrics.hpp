#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ead/molecule.hpp"

namespace ead {

// Nominal bond lengths with tolerance margins per (element, element, order),
// loaded from an editable data file and symmetric in the element pair.
class BondTable {
 public:
  static BondTable load(const std::string& path, const ElementTable& elements);

  struct Entry {
    double length = 0.0;
    double margin = 0.0;
  };

  std::optional<Entry> lookup(AtomType a, AtomType b, int order) const;
  int max_order() const { return 3; }

 private:
  // [min(a,b)][max(a,b)][order-1]
  std::optional<Entry> entries_[kNumElements][kNumElements][3];
};

struct Bond {
  int i = 0, j = 0;  // i < j
  int order = 0;
};

// Distance-based bond perception: a pair is bonded with the order whose
// nominal length interval contains the observed distance; among several
// matches the smallest |distance - nominal| wins, ties go to the higher
// order. The molecule must not contain dummy atoms.
std::vector<Bond> infer_bonds(const Molecule& mol, const BondTable& table);

// Fraction of atoms whose summed bond order equals the element valence.
double atom_stability(const Molecule& mol, std::span<const Bond> bonds,
                      const ElementTable& elements);

bool molecule_stable(const Molecule& mol, std::span<const Bond> bonds,
                     const ElementTable& elements);

// Connected bond graph with every valence satisfied.
bool validity(const Molecule& mol, std::span<const Bond> bonds,
              const ElementTable& elements);

// Permutation-invariant key of the typed bond graph: iterated neighborhood
// refinement over (element, bond order) plus edge and component summaries.
std::uint64_t canonical_key(const Molecule& mol, std::span<const Bond> bonds);

// Distinct keys / count; 1.0 for an empty set is never reported (the caller
// guards emptiness).
double uniqueness(std::span<const std::uint64_t> keys);

struct EvalReport {
  bool defined = false;  // false for an empty molecule set
  int n_molecules = 0;
  int n_valid = 0;
  double atom_stability = 0.0;
  double mol_stability = 0.0;
  double validity = 0.0;
  double uniqueness = 0.0;  // over the valid subset
  double v_times_u = 0.0;
  std::map<int, int> size_histogram;
};

EvalReport evaluate(std::span<const Molecule> mols, const BondTable& table,
                    const ElementTable& elements);

std::string report_to_json(const EvalReport& report);

// Per-molecule diagnostics: index, stable atom count, atom count, valid flag,
// canonical key.
void write_diagnostics_csv(std::ostream& os, std::span<const Molecule> mols,
                           const BondTable& table, const ElementTable& elements);

}  // namespace ead
