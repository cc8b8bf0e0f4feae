#include "molvae/chem/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace molvae::chem {

void ValenceHistogram::add_valence(int v, int delta) {
  if (v < 1) throw std::out_of_range("valence must be >= 1");
  if (v > static_cast<int>(counts.size())) counts.resize(v, 0);
  counts[v - 1] += delta;
  if (counts[v - 1] < 0) throw std::out_of_range("histogram count went negative");
}

std::string ValenceHistogram::to_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(counts[i]);
  }
  return s + "]";
}

int MolecularGraph::add_atom(const Atom& atom) {
  atoms_.push_back(atom);
  adjacency_.emplace_back();
  return static_cast<int>(atoms_.size()) - 1;
}

void MolecularGraph::add_bond(int a, int b, BondOrder order) {
  if (a == b) throw std::invalid_argument("self loops are not allowed");
  if (a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms())
    throw std::out_of_range("bond endpoint out of range");
  if (a > b) std::swap(a, b);
  if (bond_between(a, b)) throw std::invalid_argument("duplicate bond");
  bonds_.push_back({a, b, order});
  adjacency_[a].emplace_back(b, order);
  adjacency_[b].emplace_back(a, order);
}

std::optional<BondOrder> MolecularGraph::bond_between(int a, int b) const {
  for (const auto& [n, o] : adjacency_[a])
    if (n == b) return o;
  return std::nullopt;
}

int MolecularGraph::bond_weight_sum(int i) const {
  int s = 0;
  for (const auto& [n, o] : adjacency_[i]) s += bond_weight(o);
  return s;
}

bool MolecularGraph::valence_consistent() const {
  for (int i = 0; i < num_atoms(); ++i)
    if (bond_weight_sum(i) > atoms_[i].valence) return false;
  return true;
}

std::vector<std::vector<int>> MolecularGraph::adjacency_matrix() const {
  std::vector<std::vector<int>> a(num_atoms(), std::vector<int>(num_atoms(), 0));
  for (const auto& b : bonds_) a[b.a][b.b] = a[b.b][b.a] = 1;
  return a;
}

std::vector<std::vector<std::array<int, 3>>> MolecularGraph::edge_type_tensor() const {
  std::vector<std::vector<std::array<int, 3>>> e(
      num_atoms(), std::vector<std::array<int, 3>>(num_atoms(), {0, 0, 0}));
  for (const auto& b : bonds_) {
    int t = bond_weight(b.order) - 1;
    e[b.a][b.b][t] = e[b.b][b.a][t] = 1;
  }
  return e;
}

ValenceHistogram valence_histogram(const MolecularGraph& g, int size_hint) {
  ValenceHistogram h;
  h.counts.assign(std::max(size_hint, 0), 0);
  for (int i = 0; i < g.num_atoms(); ++i) {
    int v = g.atom(i).valence;
    if (v < 1 || v > kMaxValence)
      throw std::out_of_range("atom valence outside [1, " +
                              std::to_string(kMaxValence) + "]: " + std::to_string(v));
    h.add_valence(v);
  }
  return h;
}

void complete_hydrogens(MolecularGraph& g) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    int residual = g.atom(i).valence - g.bond_weight_sum(i);
    if (residual < 0)
      throw std::runtime_error("negative residual valence at atom " + std::to_string(i));
    g.atom(i).implicit_h = residual;
  }
}

namespace {

std::vector<int> component_of(const MolecularGraph& g, int start,
                              std::vector<char>& seen) {
  std::vector<int> comp, stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    comp.push_back(v);
    for (const auto& [n, o] : g.neighbors(v)) {
      (void)o;
      if (!seen[n]) {
        seen[n] = 1;
        stack.push_back(n);
      }
    }
  }
  std::sort(comp.begin(), comp.end());
  return comp;
}

}  // namespace

bool is_connected(const MolecularGraph& g) {
  if (g.num_atoms() <= 1) return true;
  std::vector<char> seen(g.num_atoms(), 0);
  return static_cast<int>(component_of(g, 0, seen).size()) == g.num_atoms();
}

MolecularGraph largest_component(const MolecularGraph& g) {
  std::vector<char> seen(g.num_atoms(), 0);
  std::vector<int> best;
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (seen[i]) continue;
    auto comp = component_of(g, i, seen);
    if (comp.size() > best.size()) best = comp;  // first largest wins ties
  }
  MolecularGraph out;
  out.set_representation(g.representation());
  std::vector<int> remap(g.num_atoms(), -1);
  for (int v : best) remap[v] = out.add_atom(g.atom(v));
  for (const auto& b : g.bonds())
    if (remap[b.a] >= 0 && remap[b.b] >= 0) out.add_bond(remap[b.a], remap[b.b], b.order);
  return out;
}

}  // namespace molvae::chem
