#include "support/smiles_oracle.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "molvae/chem/smiles.hpp"
#include "support/corpus.hpp"

namespace molvae::testing {

using chem::BondOrder;
using chem::MolecularGraph;

namespace {

std::string oracle_atom_token(const MolecularGraph& g, int v) {
  const auto& atom = g.atom(v);
  const auto& lbl = atom.label;
  static const std::set<std::string> organic = {"B", "C",  "N",  "O", "P",
                                                "S", "F", "Cl", "Br", "I"};
  int bonds = 0;
  for (auto [u, o] : g.neighbors(v)) {
    (void)u;
    bonds += chem::bond_weight(o);
  }
  int hydrogens = atom.valence - bonds;
  int charge = lbl.rep == chem::Representation::kElement ? 0 : lbl.formal_charge;

  bool plain = organic.count(lbl.element) && charge == 0 && lbl.chiral_tag.empty();
  if (plain) {
    int implied = -1;
    for (int d : chem::default_valences(lbl.element))
      if (d >= bonds) {
        implied = d - bonds;
        break;
      }
    plain = implied == hydrogens;
  }
  if (plain) return lbl.element;

  std::string t = "[" + lbl.element + lbl.chiral_tag;
  if (hydrogens == 1) t += "H";
  if (hydrogens > 1) t += "H" + std::to_string(hydrogens);
  if (charge > 0) t += charge == 1 ? "+" : "+" + std::to_string(charge);
  if (charge < 0) t += charge == -1 ? "-" : "-" + std::to_string(-charge);
  return t + "]";
}

std::string bond_str(BondOrder o) {
  if (o == BondOrder::kDouble) return "=";
  if (o == BondOrder::kTriple) return "#";
  return "";
}

struct OracleState {
  const MolecularGraph* g;
  std::vector<int> pre;
  std::vector<int> parent;
  std::vector<std::vector<int>> kids;
  // ring bonds as (open, close, order), sorted by (pre[open], pre[close])
  std::vector<std::tuple<int, int, BondOrder>> rings;
  int clock = 0;

  void classify(int v) {
    pre[v] = clock++;
    std::vector<std::pair<int, BondOrder>> nb(g->neighbors(v).begin(),
                                              g->neighbors(v).end());
    std::sort(nb.begin(), nb.end());
    for (auto [u, o] : nb) {
      if (u == parent[v]) continue;
      if (pre[u] >= 0) {
        int open = pre[u] < pre[v] ? u : v;
        int close = open == u ? v : u;
        bool dup = false;
        for (auto& [a, b, ord] : rings)
          dup |= (a == open && b == close) || (a == close && b == open);
        if (!dup) rings.emplace_back(open, close, o);
      } else {
        parent[u] = v;
        kids[v].push_back(u);
        classify(u);
      }
    }
  }

  std::string emit(int v, std::set<int>& free_digits, std::map<int, int>& ring_digit) {
    std::string out = oracle_atom_token(*g, v);
    for (std::size_t r = 0; r < rings.size(); ++r) {
      auto [open, close, order] = rings[r];
      if (close == v) {
        int d = ring_digit.at(static_cast<int>(r));
        out += d < 10 ? std::to_string(d) : "%" + std::to_string(d);
        free_digits.insert(d);
      }
    }
    for (std::size_t r = 0; r < rings.size(); ++r) {
      auto [open, close, order] = rings[r];
      if (open == v) {
        int d = *free_digits.begin();
        free_digits.erase(d);
        ring_digit[static_cast<int>(r)] = d;
        out += bond_str(order);
        out += d < 10 ? std::to_string(d) : "%" + std::to_string(d);
      }
    }
    for (std::size_t i = 0; i < kids[v].size(); ++i) {
      int c = kids[v][i];
      std::string sub = bond_str(*g->bond_between(v, c)) + emit(c, free_digits, ring_digit);
      if (i + 1 < kids[v].size())
        out += "(" + sub + ")";
      else
        out += sub;
    }
    return out;
  }
};

}  // namespace

std::string oracle_write_in_order(const MolecularGraph& g) {
  OracleState st;
  st.g = &g;
  st.pre.assign(g.num_atoms(), -1);
  st.parent.assign(g.num_atoms(), -1);
  st.kids.assign(g.num_atoms(), {});
  std::string out;
  for (int v = 0; v < g.num_atoms(); ++v) {
    if (st.pre[v] >= 0) continue;
    std::size_t ring_base = st.rings.size();
    st.classify(v);
    std::stable_sort(st.rings.begin() + ring_base, st.rings.end(),
                     [&](const auto& x, const auto& y) {
                       if (st.pre[std::get<0>(x)] != st.pre[std::get<0>(y)])
                         return st.pre[std::get<0>(x)] < st.pre[std::get<0>(y)];
                       return st.pre[std::get<1>(x)] < st.pre[std::get<1>(y)];
                     });
    std::set<int> free_digits;
    for (int d = 1; d <= 40; ++d) free_digits.insert(d);
    std::map<int, int> ring_digit;
    if (!out.empty()) out += ".";
    out += st.emit(v, free_digits, ring_digit);
  }
  return out;
}

std::string oracle_canonical(const MolecularGraph& g) {
  std::vector<int> perm(g.num_atoms());
  std::iota(perm.begin(), perm.end(), 0);
  std::string best;
  do {
    std::string s = oracle_write_in_order(permute_atoms(g, perm));
    if (best.empty() || s < best) best = std::move(s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace molvae::testing
