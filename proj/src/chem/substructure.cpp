#include "molvae/chem/substructure.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "molvae/chem/smiles.hpp"
#include "molvae/chem/types.hpp"

namespace molvae::chem {

namespace {

SubstructureKey key_of_fragment(const MolecularGraph& g, const std::set<int>& atoms) {
  MolecularGraph frag;
  frag.set_representation(g.representation());
  std::vector<int> remap(g.num_atoms(), -1);
  for (int v : atoms) {
    Atom a = g.atom(v);
    remap[v] = frag.add_atom(a);
  }
  for (const auto& b : g.bonds())
    if (remap[b.a] >= 0 && remap[b.b] >= 0) frag.add_bond(remap[b.a], remap[b.b], b.order);
  // Key capacities come from the label alone: its stored valence for
  // representation >= 2, the bare in-fragment bond sum for representation 1.
  // The key then depends only on labels and bond orders.
  for (int i = 0; i < frag.num_atoms(); ++i) {
    const AtomLabel& label = frag.atom(i).label;
    frag.atom(i).valence = label.rep == Representation::kElement
                               ? std::max(frag.bond_weight_sum(i), 1)
                               : label.total_valence;
  }
  return write_canonical_smiles(frag);
}

}  // namespace

std::vector<SubstructureKey> sample_substructures(const MolecularGraph& g, int count,
                                                  int walk_len, Rng& rng) {
  if (g.num_atoms() == 0) throw std::invalid_argument("empty graph");
  if (count < 1 || walk_len < 1) throw std::invalid_argument("count and walk_len must be >= 1");
  std::vector<SubstructureKey> keys;
  keys.reserve(count);
  for (int r = 0; r < count; ++r) {
    int v = static_cast<int>(rng.uniform_int(g.num_atoms()));
    std::set<int> atoms{v};
    for (int step = 0; step < walk_len; ++step) {
      const auto& nbr = g.neighbors(v);
      if (nbr.empty()) break;
      v = nbr[rng.uniform_int(nbr.size())].first;
      atoms.insert(v);
    }
    keys.push_back(key_of_fragment(g, atoms));
  }
  return keys;
}

}  // namespace molvae::chem
