#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "molvae/chem/smiles.hpp"

namespace molvae::chem {

namespace {

const std::set<std::string> kOrganicSubset = {"B", "C", "N", "O", "P",
                                              "S", "F", "Cl", "Br", "I"};

void append_atom_token(const MolecularGraph& g, int v, std::string& out) {
  const Atom& a = g.atom(v);
  const AtomLabel& label = a.label;
  int bond_sum = g.bond_weight_sum(v);
  int h = a.valence - bond_sum;

  bool bracket = false;
  if (!kOrganicSubset.count(label.element)) bracket = true;
  if (label.rep != Representation::kElement && label.formal_charge != 0) bracket = true;
  if (!label.chiral_tag.empty()) bracket = true;
  if (!bracket) {
    // bare atoms must imply the right hydrogen count
    int implied = -1;
    for (int d : default_valences(label.element))
      if (d >= bond_sum) {
        implied = d - bond_sum;
        break;
      }
    if (implied != h) bracket = true;
  }

  if (!bracket) {
    out += label.element;
    return;
  }
  out += '[';
  out += label.element;
  out += label.chiral_tag;
  if (h == 1)
    out += 'H';
  else if (h > 1) {
    out += 'H';
    out += std::to_string(h);
  }
  if (label.rep != Representation::kElement && label.formal_charge != 0) {
    int q = label.formal_charge;
    out += q > 0 ? '+' : '-';
    if (q > 1 || q < -1) out += std::to_string(q > 0 ? q : -q);
  }
  out += ']';
}

void append_bond_token(BondOrder order, std::string& out) {
  if (order == BondOrder::kDouble) out += '=';
  if (order == BondOrder::kTriple) out += '#';
}

void append_digit_token(int digit, std::string& out) {
  if (digit < 10) {
    out += static_cast<char>('0' + digit);
  } else {
    out += '%';
    out += std::to_string(digit);
  }
}

// Writes one connected component following the traversal "atoms in `order`
// are preferred earlier"; `order` must contain exactly the component's atoms
// and start at its root. Ring-closure digits are allocated smallest-free in
// writing order.
class OrderedWriter {
 public:
  OrderedWriter(const MolecularGraph& g, const std::vector<int>& order) : g_(g) {
    int m = g.num_atoms();
    pos_.assign(m, -1);
    for (std::size_t i = 0; i < order.size(); ++i) pos_[order[i]] = static_cast<int>(i);
    pre_.assign(m, -1);
    parent_.assign(m, -1);
    children_.assign(m, {});
    ring_open_.assign(m, {});
    ring_close_.assign(m, {});
    build_tree(order[0]);
    assign_ring_ends();
  }

  std::string str() {
    std::string out;
    out.reserve(g_.num_atoms() * 3);
    write_atom(root_, out);
    return out;
  }

 private:
  struct Ring {
    int open_atom, close_atom;
    BondOrder order;
    int digit = 0;
  };

  void build_tree(int root) {
    root_ = root;
    dfs(root);
  }

  std::vector<int> sorted_neighbors(int v) const {
    std::vector<int> nbr;
    for (const auto& [u, o] : g_.neighbors(v)) {
      (void)o;
      if (pos_[u] >= 0) nbr.push_back(u);
    }
    std::sort(nbr.begin(), nbr.end(), [&](int a, int b) { return pos_[a] < pos_[b]; });
    return nbr;
  }

  void dfs(int v) {
    pre_[v] = counter_++;
    for (int u : sorted_neighbors(v)) {
      if (u == parent_[v]) continue;
      if (pre_[u] >= 0) {
        auto key = std::minmax(v, u);
        ring_seen_.insert({key.first, key.second});
        continue;
      }
      parent_[u] = v;
      children_[v].push_back(u);
      dfs(u);
    }
  }

  void assign_ring_ends() {
    for (const auto& [a, b] : ring_seen_) {
      Ring r;
      r.open_atom = pre_[a] < pre_[b] ? a : b;
      r.close_atom = pre_[a] < pre_[b] ? b : a;
      r.order = *g_.bond_between(a, b);
      rings_.push_back(r);
    }
    std::sort(rings_.begin(), rings_.end(), [&](const Ring& x, const Ring& y) {
      if (pre_[x.open_atom] != pre_[y.open_atom]) return pre_[x.open_atom] < pre_[y.open_atom];
      return pre_[x.close_atom] < pre_[y.close_atom];
    });
    for (std::size_t i = 0; i < rings_.size(); ++i) {
      ring_open_[rings_[i].open_atom].push_back(static_cast<int>(i));
      ring_close_[rings_[i].close_atom].push_back(static_cast<int>(i));
    }
  }

  void write_atom(int v, std::string& out) {
    append_atom_token(g_, v, out);
    for (int ri : ring_close_[v]) {
      append_digit_token(rings_[ri].digit, out);
      free_digits_.insert(rings_[ri].digit);
    }
    for (int ri : ring_open_[v]) {
      int d = *free_digits_.begin();
      free_digits_.erase(free_digits_.begin());
      rings_[ri].digit = d;
      append_bond_token(rings_[ri].order, out);
      append_digit_token(d, out);
    }
    const auto& kids = children_[v];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      bool last = i + 1 == kids.size();
      if (!last) out += '(';
      append_bond_token(*g_.bond_between(v, kids[i]), out);
      write_atom(kids[i], out);
      if (!last) out += ')';
    }
  }

  const MolecularGraph& g_;
  std::vector<int> pos_, pre_, parent_;
  std::vector<std::vector<int>> children_, ring_open_, ring_close_;
  std::set<std::pair<int, int>> ring_seen_;
  std::vector<Ring> rings_;
  std::set<int> free_digits_{1, 2, 3,  4,  5,  6,  7,  8,  9,  10, 11, 12,
                             13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24};
  int root_ = 0;
  int counter_ = 0;
};

std::string write_component(const MolecularGraph& g, const std::vector<int>& order) {
  return OrderedWriter(g, order).str();
}

std::vector<std::vector<int>> connected_components(const MolecularGraph& g) {
  std::vector<char> seen(g.num_atoms(), 0);
  std::vector<std::vector<int>> comps;
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (seen[i]) continue;
    std::vector<int> comp, stack{i};
    seen[i] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (const auto& [u, o] : g.neighbors(v)) {
        (void)o;
        if (!seen[u]) {
          seen[u] = 1;
          stack.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

// Iterative neighborhood refinement: returns dense ranks per atom over the
// given node set (position in `nodes`), ties possible.
std::vector<int> refine_ranks(const MolecularGraph& g, const std::vector<int>& nodes,
                              const std::vector<int>* seed_ranks) {
  int n = static_cast<int>(nodes.size());
  std::vector<int> local(g.num_atoms(), -1);
  for (int i = 0; i < n; ++i) local[nodes[i]] = i;

  std::vector<std::string> key0(n);
  for (int i = 0; i < n; ++i) {
    int v = nodes[i];
    const Atom& a = g.atom(v);
    std::vector<int> weights;
    for (const auto& [u, o] : g.neighbors(v))
      if (local[u] >= 0) weights.push_back(bond_weight(o));
    std::sort(weights.begin(), weights.end());
    std::string k = a.label.to_string();
    k += '|' + std::to_string(a.valence) + '|' + std::to_string(weights.size()) + '|';
    for (int w : weights) k += static_cast<char>('0' + w);
    if (seed_ranks) k += '|' + std::to_string((*seed_ranks)[i]);
    key0[i] = std::move(k);
  }
  std::vector<int> rank(n);
  {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key0[a] < key0[b]; });
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (i > 0 && key0[idx[i]] != key0[idx[i - 1]]) ++r;
      rank[idx[i]] = r;
    }
  }

  int classes = -1;
  for (int round = 0; round < n + 2; ++round) {
    std::vector<std::vector<int>> key(n);
    for (int i = 0; i < n; ++i) {
      int v = nodes[i];
      std::vector<std::pair<int, int>> nb;
      for (const auto& [u, o] : g.neighbors(v))
        if (local[u] >= 0) nb.emplace_back(bond_weight(o), rank[local[u]]);
      std::sort(nb.begin(), nb.end());
      key[i].push_back(rank[i]);
      for (auto& [w, r] : nb) {
        key[i].push_back(w);
        key[i].push_back(r);
      }
    }
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key[a] < key[b]; });
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (i > 0 && key[idx[i]] != key[idx[i - 1]]) ++r;
      rank[idx[i]] = r;
    }
    if (r + 1 == classes) break;
    classes = r + 1;
  }
  return rank;
}

// Enumerates realizable DFS pre-orders of a component, calling emit(order)
// for each; gives up (returns false) once the plan budget is exhausted.
class PlanEnumerator {
 public:
  PlanEnumerator(const MolecularGraph& g, const std::vector<int>& nodes,
                 const std::vector<int>& heuristic, long budget)
      : g_(g), heuristic_(heuristic), budget_(budget) {
    member_.assign(g.num_atoms(), 0);
    for (int v : nodes) member_[v] = 1;
    visited_.assign(g.num_atoms(), 0);
  }

  template <class Emit>
  bool run(int start, Emit&& emit) {
    order_.clear();
    std::fill(visited_.begin(), visited_.end(), 0);
    visited_[start] = 1;
    order_.push_back(start);
    return rec({start}, emit);
  }

  long used() const { return used_; }

 private:
  template <class Emit>
  bool rec(std::vector<int> path, Emit& emit) {
    while (!path.empty()) {
      int v = path.back();
      std::vector<int> cands;
      for (const auto& [u, o] : g_.neighbors(v)) {
        (void)o;
        if (member_[u] && !visited_[u]) cands.push_back(u);
      }
      if (cands.empty()) {
        path.pop_back();
        continue;
      }
      std::sort(cands.begin(), cands.end(), [&](int a, int b) {
        if (heuristic_[a] != heuristic_[b]) return heuristic_[a] < heuristic_[b];
        return a < b;
      });
      if (cands.size() == 1) {
        visited_[cands[0]] = 1;
        order_.push_back(cands[0]);
        path.push_back(cands[0]);
        continue;
      }
      std::size_t mark = order_.size();
      for (int c : cands) {
        visited_[c] = 1;
        order_.push_back(c);
        std::vector<int> next = path;
        next.push_back(c);
        if (!rec(std::move(next), emit)) return false;
        while (order_.size() > mark) {
          visited_[order_.back()] = 0;
          order_.pop_back();
        }
      }
      return true;
    }
    if (++used_ > budget_) return false;
    emit(order_);
    return true;
  }

  const MolecularGraph& g_;
  const std::vector<int>& heuristic_;
  std::vector<char> member_, visited_;
  std::vector<int> order_;
  long budget_;
  long used_ = 0;
};

// Individualization-refinement fallback for molecules whose plan space
// exceeds the budget: produces a small set of candidate total orders.
void individualize(const MolecularGraph& g, const std::vector<int>& nodes,
                   std::vector<int> ranks, std::vector<std::vector<int>>& leaves,
                   int leaf_budget) {
  if (static_cast<int>(leaves.size()) >= leaf_budget) return;
  int n = static_cast<int>(nodes.size());
  int tied = -1;
  for (int r = 0; r < n && tied < 0; ++r) {
    int count = 0;
    for (int i = 0; i < n; ++i) count += ranks[i] == r;
    if (count > 1) tied = r;
  }
  if (tied < 0) {
    std::vector<int> order(n);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return ranks[a] < ranks[b]; });
    for (int i = 0; i < n; ++i) order[i] = nodes[idx[i]];
    leaves.push_back(std::move(order));
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (ranks[i] != tied) continue;
    std::vector<int> seeded = ranks;
    for (int j = 0; j < n; ++j) seeded[j] = seeded[j] * 2 + 1;
    seeded[i] -= 1;
    individualize(g, nodes, refine_ranks(g, nodes, &seeded), leaves, leaf_budget);
    if (static_cast<int>(leaves.size()) >= leaf_budget) return;
  }
}

std::string canonical_component(const MolecularGraph& g, const std::vector<int>& nodes) {
  if (nodes.size() == 1) {
    std::string out;
    append_atom_token(g, nodes[0], out);
    return out;
  }
  std::vector<int> local_rank = refine_ranks(g, nodes, nullptr);
  std::vector<int> heuristic(g.num_atoms(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) heuristic[nodes[i]] = local_rank[i];

  constexpr long kPlanBudget = 60000;
  PlanEnumerator plans(g, nodes, heuristic, kPlanBudget);
  std::string best;
  bool exhausted = true;
  std::vector<int> starts = nodes;
  std::sort(starts.begin(), starts.end(), [&](int a, int b) {
    if (heuristic[a] != heuristic[b]) return heuristic[a] < heuristic[b];
    return a < b;
  });
  for (int s : starts) {
    bool ok = plans.run(s, [&](const std::vector<int>& order) {
      std::string cand = write_component(g, order);
      if (best.empty() || cand < best) best = std::move(cand);
    });
    if (!ok) {
      exhausted = false;
      break;
    }
  }
  if (exhausted) return best;

  // Plan space too large: canonical order from individualization-refinement.
  std::vector<std::vector<int>> leaves;
  individualize(g, nodes, local_rank, leaves, 64);
  best.clear();
  for (const auto& order : leaves) {
    std::string cand = write_component(g, order);
    if (best.empty() || cand < best) best = std::move(cand);
  }
  return best;
}

}  // namespace

std::string write_smiles_in_order(const MolecularGraph& g) {
  if (g.num_atoms() == 0) return "";
  std::string out;
  for (const auto& comp : connected_components(g)) {
    if (!out.empty()) out += '.';
    out += write_component(g, comp);
  }
  return out;
}

std::string write_canonical_smiles(const MolecularGraph& g) {
  if (g.num_atoms() == 0) return "";
  std::vector<std::string> parts;
  for (const auto& comp : connected_components(g)) parts.push_back(canonical_component(g, comp));
  std::sort(parts.begin(), parts.end());
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += '.' + parts[i];
  return out;
}

}  // namespace molvae::chem
