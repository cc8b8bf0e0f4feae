#include "support/corpus.hpp"

#include <algorithm>
#include <sstream>

#include "molvae/chem/smiles.hpp"

namespace molvae::testing {

using chem::AtomLabel;
using chem::BondOrder;
using chem::MolecularGraph;
using chem::Representation;

MolecularGraph random_molecule(Rng& rng, int max_atoms, Representation rep) {
  static const std::vector<std::pair<std::string, int>> kAlphabet = {
      {"C", 4}, {"N", 3}, {"O", 2}, {"F", 1}};

  int m = 1 + static_cast<int>(rng.uniform_int(max_atoms));
  MolecularGraph g;
  g.set_representation(rep);
  std::vector<int> residual;

  for (int i = 0; i < m; ++i) {
    auto [element, valence] = kAlphabet[rng.uniform_int(kAlphabet.size())];
    if (i > 0) {
      // need some atom with spare capacity to attach to
      bool attachable = false;
      for (int j = 0; j < i; ++j) attachable |= residual[j] > 0;
      if (!attachable) break;
    }
    AtomLabel label;
    label.rep = rep;
    label.element = element;
    if (rep != Representation::kElement) label.total_valence = valence;
    int idx = g.add_atom({label, valence, 0});
    residual.push_back(valence);
    if (idx > 0) {
      std::vector<int> hosts;
      for (int j = 0; j < idx; ++j)
        if (residual[j] > 0) hosts.push_back(j);
      int j = hosts[rng.uniform_int(hosts.size())];
      int max_w = std::min(residual[j], residual[idx]);
      int w = 1;
      if (max_w >= 2 && rng.uniform() < 0.25) w = 2;
      if (max_w >= 3 && rng.uniform() < 0.10) w = 3;
      g.add_bond(j, idx, chem::bond_order_from_weight(w));
      residual[j] -= w;
      residual[idx] -= w;
    }
  }
  // occasional ring bonds between non-adjacent atoms with spare capacity
  int ring_tries = static_cast<int>(rng.uniform_int(3));
  for (int t = 0; t < ring_tries; ++t) {
    std::vector<std::pair<int, int>> options;
    for (int a = 0; a < g.num_atoms(); ++a)
      for (int b = a + 1; b < g.num_atoms(); ++b)
        if (residual[a] > 0 && residual[b] > 0 && !g.bond_between(a, b))
          options.emplace_back(a, b);
    if (options.empty()) break;
    auto [a, b] = options[rng.uniform_int(options.size())];
    g.add_bond(a, b, BondOrder::kSingle);
    residual[a] -= 1;
    residual[b] -= 1;
  }
  chem::complete_hydrogens(g);
  return g;
}

std::string random_corpus(std::uint64_t seed, int n, int max_atoms) {
  Rng rng(seed);
  std::ostringstream os;
  for (int i = 0; i < n; ++i) {
    auto g = random_molecule(rng, max_atoms, Representation::kValenceCharge);
    int hetero = 0;
    for (const auto& a : g.atoms()) hetero += a.label.element != "C";
    double frac = static_cast<double>(hetero) / g.num_atoms();
    os << chem::write_canonical_smiles(g) << '\t' << frac << '\n';
  }
  return os.str();
}

MolecularGraph permute_atoms(const MolecularGraph& g, const std::vector<int>& perm) {
  MolecularGraph out;
  out.set_representation(g.representation());
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.add_atom(g.atom(perm[i]));
    inverse[perm[i]] = static_cast<int>(i);
  }
  for (const auto& b : g.bonds()) out.add_bond(inverse[b.a], inverse[b.b], b.order);
  return out;
}

}  // namespace molvae::testing
