#include "ead/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "vendor_json.hpp"

namespace ead {

BondTable BondTable::load(const std::string& path, const ElementTable& elements) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bond table: " + path);
  BondTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string sa, sb;
    int order;
    double length, margin;
    if (!(ls >> sa)) continue;
    if (!(ls >> sb >> order >> length >> margin))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed bond entry");
    if (order < 1 || order > 3 || length <= 0.0 || margin <= 0.0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": invalid bond entry");
    const int a = static_cast<int>(elements.from_symbol(sa));
    const int b = static_cast<int>(elements.from_symbol(sb));
    if (a >= kNumElements || b >= kNumElements)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": dummy atoms cannot bond");
    const Entry e{length, margin};
    table.entries_[std::min(a, b)][std::max(a, b)][order - 1] = e;
  }
  return table;
}

std::optional<BondTable::Entry> BondTable::lookup(AtomType a, AtomType b,
                                                  int order) const {
  const int ia = static_cast<int>(a), ib = static_cast<int>(b);
  if (ia >= kNumElements || ib >= kNumElements || order < 1 || order > 3)
    return std::nullopt;
  return entries_[std::min(ia, ib)][std::max(ia, ib)][order - 1];
}

std::vector<Bond> infer_bonds(const Molecule& mol, const BondTable& table) {
  const int n = mol.size();
  for (AtomType t : mol.types)
    if (t == AtomType::Dummy)
      throw std::invalid_argument("infer_bonds: molecule contains dummy atoms");

  std::vector<Bond> bonds;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        const double dd = mol.positions[i][d] - mol.positions[j][d];
        d2 += dd * dd;
      }
      const double dist = std::sqrt(d2);
      int best_order = 0;
      double best_dev = 0.0;
      for (int order = 1; order <= table.max_order(); ++order) {
        const auto entry = table.lookup(mol.types[i], mol.types[j], order);
        if (!entry) continue;
        const double dev = std::abs(dist - entry->length);
        if (dev > entry->margin) continue;
        if (best_order == 0 || dev < best_dev ||
            (dev == best_dev && order > best_order)) {
          best_order = order;
          best_dev = dev;
        }
      }
      if (best_order > 0) bonds.push_back({i, j, best_order});
    }
  }
  return bonds;
}

namespace {

std::vector<int> valence_sums(int n, std::span<const Bond> bonds) {
  std::vector<int> val(n, 0);
  for (const Bond& b : bonds) {
    val[b.i] += b.order;
    val[b.j] += b.order;
  }
  return val;
}

std::vector<char> stable_atoms(const Molecule& mol, std::span<const Bond> bonds,
                               const ElementTable& elements) {
  const auto val = valence_sums(mol.size(), bonds);
  std::vector<char> stable(mol.size());
  for (int i = 0; i < mol.size(); ++i)
    stable[i] = val[i] == elements.spec(mol.types[i]).valence ? 1 : 0;
  return stable;
}

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix(h ^ (v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2)));
}

}  // namespace

double atom_stability(const Molecule& mol, std::span<const Bond> bonds,
                      const ElementTable& elements) {
  if (mol.size() == 0) return 0.0;
  const auto stable = stable_atoms(mol, bonds, elements);
  int count = 0;
  for (char s : stable) count += s;
  return static_cast<double>(count) / mol.size();
}

bool molecule_stable(const Molecule& mol, std::span<const Bond> bonds,
                     const ElementTable& elements) {
  if (mol.size() == 0) return false;
  const auto stable = stable_atoms(mol, bonds, elements);
  for (char s : stable)
    if (!s) return false;
  return true;
}

bool validity(const Molecule& mol, std::span<const Bond> bonds,
              const ElementTable& elements) {
  const int n = mol.size();
  if (n == 0) return false;
  if (!molecule_stable(mol, bonds, elements)) return false;
  // Connectivity over the bond graph.
  std::vector<std::vector<int>> adj(n);
  for (const Bond& b : bonds) {
    adj[b.i].push_back(b.j);
    adj[b.j].push_back(b.i);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 0;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    ++visited;
    for (int w : adj[u]) {
      if (seen[w]) continue;
      seen[w] = 1;
      stack.push_back(w);
    }
  }
  return visited == n;
}

std::uint64_t canonical_key(const Molecule& mol, std::span<const Bond> bonds) {
  const int n = mol.size();
  if (n == 0) return 0;

  std::vector<std::vector<std::pair<int, int>>> nbrs(n);  // (neighbor, order)
  for (const Bond& b : bonds) {
    nbrs[b.i].emplace_back(b.j, b.order);
    nbrs[b.j].emplace_back(b.i, b.order);
  }

  std::vector<std::uint64_t> label(n);
  for (int i = 0; i < n; ++i)
    label[i] = mix(0xE1ull + static_cast<std::uint64_t>(mol.types[i]));

  // Neighborhood refinement; n rounds reach the stable partition on any
  // n-atom graph.
  std::vector<std::uint64_t> next(n);
  for (int round = 0; round < n; ++round) {
    for (int i = 0; i < n; ++i) {
      std::vector<std::uint64_t> sig;
      sig.reserve(nbrs[i].size());
      for (const auto& [j, order] : nbrs[i])
        sig.push_back(combine(static_cast<std::uint64_t>(order), label[j]));
      std::sort(sig.begin(), sig.end());
      std::uint64_t h = label[i];
      for (std::uint64_t s : sig) h = combine(h, s);
      next[i] = h;
    }
    label.swap(next);
  }

  std::vector<std::uint64_t> parts = label;
  std::sort(parts.begin(), parts.end());
  std::uint64_t key = mix(static_cast<std::uint64_t>(n));
  for (std::uint64_t p : parts) key = combine(key, p);

  // Edge summary distinguishes label-preserving edge rearrangements.
  std::vector<std::uint64_t> esig;
  esig.reserve(bonds.size());
  for (const Bond& b : bonds)
    esig.push_back(combine(static_cast<std::uint64_t>(b.order),
                           std::min(label[b.i], label[b.j]) ^
                               mix(std::max(label[b.i], label[b.j]))));
  std::sort(esig.begin(), esig.end());
  for (std::uint64_t s : esig) key = combine(key, s);

  // Component size multiset separates e.g. one ring from two smaller ones.
  std::vector<int> comp(n, -1);
  std::vector<int> sizes;
  for (int i = 0; i < n; ++i) {
    if (comp[i] >= 0) continue;
    int size = 0;
    std::vector<int> stack{i};
    comp[i] = i;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      ++size;
      for (const auto& [w, order] : nbrs[u]) {
        if (comp[w] >= 0) continue;
        comp[w] = i;
        stack.push_back(w);
      }
    }
    sizes.push_back(size);
  }
  std::sort(sizes.begin(), sizes.end());
  for (int s : sizes) key = combine(key, static_cast<std::uint64_t>(s));
  return key;
}

double uniqueness(std::span<const std::uint64_t> keys) {
  if (keys.empty()) return 0.0;
  std::vector<std::uint64_t> sorted(keys.begin(), keys.end());
  std::sort(sorted.begin(), sorted.end());
  const auto last = std::unique(sorted.begin(), sorted.end());
  return static_cast<double>(last - sorted.begin()) / keys.size();
}

EvalReport evaluate(std::span<const Molecule> mols, const BondTable& table,
                    const ElementTable& elements) {
  EvalReport rep;
  rep.n_molecules = static_cast<int>(mols.size());
  if (mols.empty()) return rep;  // defined stays false; no division by zero
  rep.defined = true;

  const int n = rep.n_molecules;
  std::vector<double> astab(n, 0.0);
  std::vector<char> mstab(n, 0), valid(n, 0);
  std::vector<std::uint64_t> keys(n, 0);

#pragma omp parallel for schedule(static)
  for (int m = 0; m < n; ++m) {
    const Molecule mol = strip_dummies(mols[m]);
    if (mol.size() == 0) continue;  // empty generation: unstable and invalid
    const auto bonds = infer_bonds(mol, table);
    astab[m] = atom_stability(mol, bonds, elements);
    mstab[m] = molecule_stable(mol, bonds, elements) ? 1 : 0;
    valid[m] = validity(mol, bonds, elements) ? 1 : 0;
    keys[m] = canonical_key(mol, bonds);
  }

  long total_atoms = 0;
  double stable_atoms_total = 0.0;
  std::vector<std::uint64_t> valid_keys;
  for (int m = 0; m < n; ++m) {
    const int size = strip_dummies(mols[m]).size();
    rep.size_histogram[size] += 1;
    total_atoms += size;
    stable_atoms_total += astab[m] * size;
    rep.mol_stability += mstab[m];
    rep.validity += valid[m];
    if (valid[m]) valid_keys.push_back(keys[m]);
  }
  rep.atom_stability =
      total_atoms > 0 ? stable_atoms_total / static_cast<double>(total_atoms) : 0.0;
  rep.mol_stability /= n;
  rep.validity /= n;
  rep.n_valid = static_cast<int>(valid_keys.size());
  rep.uniqueness = valid_keys.empty() ? 0.0 : uniqueness(valid_keys);
  rep.v_times_u = rep.validity * rep.uniqueness;
  return rep;
}

std::string report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["defined"] = rep.defined;
  j["n_molecules"] = rep.n_molecules;
  j["n_valid"] = rep.n_valid;
  j["atom_stability"] = rep.atom_stability;
  j["mol_stability"] = rep.mol_stability;
  j["validity"] = rep.validity;
  j["uniqueness"] = rep.uniqueness;
  j["v_times_u"] = rep.v_times_u;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [size, count] : rep.size_histogram)
    hist[std::to_string(size)] = count;
  j["size_histogram"] = hist;
  return j.dump(2);
}

void write_diagnostics_csv(std::ostream& os, std::span<const Molecule> mols,
                           const BondTable& table,
                           const ElementTable& elements) {
  os << "index,stable_atoms,atoms,valid,key\n";
  char buf[128];
  for (std::size_t m = 0; m < mols.size(); ++m) {
    const Molecule mol = strip_dummies(mols[m]);
    int stable_count = 0;
    bool is_valid = false;
    std::uint64_t key = 0;
    if (mol.size() > 0) {
      const auto bonds = infer_bonds(mol, table);
      const auto stable = stable_atoms(mol, bonds, elements);
      for (char s : stable) stable_count += s;
      is_valid = validity(mol, bonds, elements);
      key = canonical_key(mol, bonds);
    }
    std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%d,%llu\n", m, stable_count,
                  mol.size(), is_valid ? 1 : 0,
                  static_cast<unsigned long long>(key));
    os << buf;
  }
}

}  // namespace ead
