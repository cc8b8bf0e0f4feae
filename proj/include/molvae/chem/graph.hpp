#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "molvae/chem/types.hpp"

namespace molvae::chem {

// Histogram of valences: counts[i] = number of atoms with valence i+1.
struct ValenceHistogram {
  std::vector<int> counts;

  int total() const {
    int s = 0;
    for (int c : counts) s += c;
    return s;
  }
  int at_valence(int v) const {
    return (v >= 1 && v <= static_cast<int>(counts.size())) ? counts[v - 1] : 0;
  }
  void add_valence(int v, int delta = 1);
  friend bool operator==(const ValenceHistogram& a, const ValenceHistogram& b) {
    return a.counts == b.counts;
  }
  friend bool operator<(const ValenceHistogram& a, const ValenceHistogram& b) {
    return a.counts < b.counts;
  }
  std::string to_string() const;
};

// Molecular graph: atoms in SMILES order, undirected typed bonds (a < b),
// no self loops, at most one bond per pair.
class MolecularGraph {
 public:
  MolecularGraph() = default;

  int add_atom(const Atom& atom);
  // Throws on self loops, duplicate pairs and out-of-range indices.
  void add_bond(int a, int b, BondOrder order);

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  const Atom& atom(int i) const { return atoms_[i]; }
  Atom& atom(int i) { return atoms_[i]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

  // (neighbor, order) pairs in insertion order.
  const std::vector<std::pair<int, BondOrder>>& neighbors(int i) const {
    return adjacency_[i];
  }
  std::optional<BondOrder> bond_between(int a, int b) const;

  // Sum of incident bond weights.
  int bond_weight_sum(int i) const;

  // True when every atom satisfies bond_weight_sum <= valence capacity.
  bool valence_consistent() const;

  Representation representation() const { return rep_; }
  void set_representation(Representation r) { rep_ = r; }

  // Dense views of the paper's A / E / F tensors.
  std::vector<std::vector<int>> adjacency_matrix() const;
  // one-hot over (single, double, triple)
  std::vector<std::vector<std::array<int, 3>>> edge_type_tensor() const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<std::pair<int, BondOrder>>> adjacency_;
  Representation rep_ = Representation::kElement;
};

// counts[i-1] = number of atoms with label-resolved valence i. Valences are
// taken from the atoms' capacity field (set at parse or decode time).
ValenceHistogram valence_histogram(const MolecularGraph& g, int size_hint = 0);

// Sets each atom's implicit hydrogen count to capacity minus bond weight sum.
// Throws std::runtime_error on a negative residual.
void complete_hydrogens(MolecularGraph& g);

bool is_connected(const MolecularGraph& g);

// Largest connected component; ties broken by lowest atom index. Atom order
// within the component follows the original order.
MolecularGraph largest_component(const MolecularGraph& g);

}  // namespace molvae::chem
