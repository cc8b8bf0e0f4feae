#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "molvae/chem/smiles.hpp"

namespace molvae::chem {

namespace {

const std::set<std::string> kKnownElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Ti", "Cr", "Mn", "Fe",
    "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Zr", "Mo",
    "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Pt",
    "Au", "Hg", "Tl", "Pb", "Bi"};

const std::map<std::string, std::vector<int>> kDefaultValences = {
    {"B", {3}},  {"C", {4}},  {"N", {3, 5}}, {"O", {2}},  {"P", {3, 5}},
    {"S", {2, 4, 6}}, {"F", {1}}, {"Cl", {1}}, {"Br", {1}}, {"I", {1}}};

// Bond slot between two parsed atoms. kNone means "not written": single, or
// aromatic when both endpoints are aromatic.
enum class RawOrder { kNone, kSingle, kDouble, kTriple, kAromatic };

struct RawAtom {
  std::string element;
  bool aromatic = false;
  bool bracket = false;
  int explicit_h = 0;   // bracket H count
  int charge = 0;
  std::string chiral;   // "", "@", "@@"
  std::size_t pos = 0;
  // filled after kekulization
  int implicit_h = 0;
  int total_valence = 0;
};

struct RawBond {
  int a, b;
  RawOrder order;
  std::size_t pos;
};

struct RingSlot {
  int atom;
  RawOrder order;
  std::size_t pos;
};

class Parser {
 public:
  Parser(const std::string& text, Representation rep) : text_(text), rep_(rep) {}

  MolecularGraph run() {
    parse_chain();
    if (!branch_stack_.empty()) throw ParseError("unmatched branch", text_.size());
    if (!ring_slots_.empty())
      throw ParseError("unmatched ring bond " + std::to_string(ring_slots_.begin()->first),
                       ring_slots_.begin()->second.pos);
    if (atoms_.empty()) throw ParseError("empty molecule", 0);
    kekulize();
    resolve_hydrogens();
    return build_graph();
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, i_); }

  bool eof() const { return i_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[i_]; }
  char take() { return text_[i_++]; }

  void parse_chain() {
    while (!eof()) {
      char c = peek();
      if (c == '(') {
        if (prev_atom_ < 0) fail("branch before any atom");
        if (pending_ != RawOrder::kNone) fail("bond symbol before branch");
        branch_stack_.push_back(prev_atom_);
        ++i_;
      } else if (c == ')') {
        if (branch_stack_.empty()) fail("unmatched branch");
        if (pending_ != RawOrder::kNone) fail("dangling bond symbol");
        prev_atom_ = branch_stack_.back();
        branch_stack_.pop_back();
        ++i_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pending_ != RawOrder::kNone) fail("repeated bond symbol");
        if (prev_atom_ < 0) fail("bond symbol before any atom");
        pending_ = bond_symbol(c);
        ++i_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        parse_ring_closure();
      } else if (c == '.') {
        fail("disconnected components are not supported");
      } else if (c == '[') {
        add_atom(parse_bracket_atom());
      } else {
        add_atom(parse_organic_atom());
      }
    }
    if (pending_ != RawOrder::kNone) fail("dangling bond symbol");
  }

  static RawOrder bond_symbol(char c) {
    switch (c) {
      case '=': return RawOrder::kDouble;
      case '#': return RawOrder::kTriple;
      case ':': return RawOrder::kAromatic;
      default: return RawOrder::kSingle;  // '-', '/', '\\'
    }
  }

  void parse_ring_closure() {
    std::size_t pos = i_;
    int digit;
    if (peek() == '%') {
      ++i_;
      if (eof() || !std::isdigit(static_cast<unsigned char>(peek()))) fail("bad %nn ring bond");
      int d1 = take() - '0';
      if (eof() || !std::isdigit(static_cast<unsigned char>(peek()))) fail("bad %nn ring bond");
      digit = d1 * 10 + (take() - '0');
    } else {
      digit = take() - '0';
    }
    if (prev_atom_ < 0) fail("ring bond before any atom");
    RawOrder order = pending_;
    pending_ = RawOrder::kNone;

    auto it = ring_slots_.find(digit);
    if (it == ring_slots_.end()) {
      ring_slots_[digit] = {prev_atom_, order, pos};
      return;
    }
    RingSlot open = it->second;
    ring_slots_.erase(it);
    if (open.atom == prev_atom_) throw ParseError("ring bond to same atom", pos);
    RawOrder merged = open.order;
    if (order != RawOrder::kNone) {
      if (merged != RawOrder::kNone && merged != order)
        throw ParseError("conflicting ring bond orders", pos);
      merged = order;
    }
    add_bond(open.atom, prev_atom_, merged, pos);
  }

  RawAtom parse_organic_atom() {
    RawAtom a;
    a.pos = i_;
    char c = peek();
    if (c == 'C' && i_ + 1 < text_.size() && text_[i_ + 1] == 'l') {
      a.element = "Cl";
      i_ += 2;
    } else if (c == 'B' && i_ + 1 < text_.size() && text_[i_ + 1] == 'r') {
      a.element = "Br";
      i_ += 2;
    } else if (c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' || c == 'S' ||
               c == 'F' || c == 'I') {
      a.element = std::string(1, take());
    } else if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
      a.element = std::string(1, static_cast<char>(std::toupper(c)));
      a.aromatic = true;
      ++i_;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
    return a;
  }

  RawAtom parse_bracket_atom() {
    RawAtom a;
    a.pos = i_;
    a.bracket = true;
    ++i_;  // '['
    if (eof()) fail("unterminated bracket atom");
    if (std::isdigit(static_cast<unsigned char>(peek()))) fail("isotopes are not supported");

    char c = peek();
    if (std::islower(static_cast<unsigned char>(c))) {
      // aromatic symbol: c n o p s b se as
      std::string sym(1, take());
      if ((sym == "s" && peek() == 'e') || (sym == "a" && peek() == 's')) sym += take();
      std::string upper = sym;
      upper[0] = static_cast<char>(std::toupper(upper[0]));
      if (upper != "C" && upper != "N" && upper != "O" && upper != "P" && upper != "S" &&
          upper != "B" && upper != "Se" && upper != "As")
        fail("unknown aromatic element '" + sym + "'");
      a.element = upper;
      a.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, take());
      if (!eof() && std::islower(static_cast<unsigned char>(peek())) &&
          kKnownElements.count(sym + text_[i_]))
        sym += take();
      if (!kKnownElements.count(sym)) fail("unknown element '" + sym + "'");
      if (sym == "H") fail("explicit hydrogen atoms are not supported");
      a.element = sym;
    } else {
      fail("expected element symbol in bracket atom");
    }

    if (peek() == '@') {
      ++i_;
      if (peek() == '@') {
        ++i_;
        a.chiral = "@@";
      } else {
        a.chiral = "@";
      }
    }
    if (peek() == 'H') {
      ++i_;
      a.explicit_h = 1;
      if (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) a.explicit_h = take() - '0';
    }
    if (peek() == '+' || peek() == '-') {
      int sign = take() == '+' ? 1 : -1;
      int mag = 1;
      if (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) {
        mag = take() - '0';
        if (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) mag = mag * 10 + (take() - '0');
      } else {
        while (peek() == (sign > 0 ? '+' : '-')) {
          ++i_;
          ++mag;
        }
      }
      a.charge = sign * mag;
    }
    if (peek() == ':') fail("atom class labels are not supported");
    if (peek() != ']') fail("unterminated bracket atom");
    ++i_;
    return a;
  }

  void add_atom(RawAtom atom) {
    atoms_.push_back(atom);
    adjacency_.emplace_back();
    int idx = static_cast<int>(atoms_.size()) - 1;
    if (prev_atom_ >= 0) {
      add_bond(prev_atom_, idx, pending_, atom.pos);
      pending_ = RawOrder::kNone;
    }
    prev_atom_ = idx;
  }

  void add_bond(int a, int b, RawOrder order, std::size_t pos) {
    if (order == RawOrder::kNone)
      order = (atoms_[a].aromatic && atoms_[b].aromatic) ? RawOrder::kAromatic
                                                         : RawOrder::kSingle;
    if (order == RawOrder::kAromatic && !(atoms_[a].aromatic && atoms_[b].aromatic))
      throw ParseError("aromatic bond between non-aromatic atoms", pos);
    for (const auto& eb : bonds_)
      if ((eb.a == a && eb.b == b) || (eb.a == b && eb.b == a))
        throw ParseError("duplicate bond", pos);
    bonds_.push_back({a, b, order, pos});
    adjacency_[a].push_back(static_cast<int>(bonds_.size()) - 1);
    adjacency_[b].push_back(static_cast<int>(bonds_.size()) - 1);
  }

  // Valence available to an aromatic atom given its charge, for the pi
  // assignment. Unlisted combinations make kekulization fail.
  static int aromatic_base_valence(const RawAtom& a, std::size_t pos) {
    const std::string& e = a.element;
    int q = a.charge;
    if (e == "C" && q == 0) return 4;
    if (e == "C" && (q == 1 || q == -1)) return 3;
    if (e == "N" || e == "P" || e == "As") return 3 + q;
    if (e == "O" || e == "S" || e == "Se") return 2 + q;
    if (e == "B") return 3 - q;
    throw ParseError("cannot kekulize aromatic " + e, pos);
  }

  void kekulize() {
    int n = static_cast<int>(atoms_.size());
    std::vector<int> sigma(n, 0);
    for (const auto& b : bonds_) {
      int w = b.order == RawOrder::kDouble ? 2 : b.order == RawOrder::kTriple ? 3 : 1;
      sigma[b.a] += w;
      sigma[b.b] += w;
    }
    // Which aromatic atoms must take exactly one double bond.
    std::vector<char> needs_pi(n, 0);
    for (int v = 0; v < n; ++v) {
      RawAtom& a = atoms_[v];
      if (!a.aromatic) continue;
      int base = aromatic_base_valence(a, a.pos);
      if (!a.bracket) a.explicit_h = std::max(base - sigma[v] - 1, 0);
      int avail = base - sigma[v] - a.explicit_h;
      if (avail == 1)
        needs_pi[v] = 1;
      else if (avail != 0)
        throw ParseError("cannot kekulize: inconsistent aromatic valence", a.pos);
    }
    // Perfect matching over pi-needing atoms along aromatic bonds.
    std::vector<int> match(n, -1);
    std::vector<std::vector<int>> arom_adj(n);
    for (std::size_t bi = 0; bi < bonds_.size(); ++bi) {
      const auto& b = bonds_[bi];
      if (b.order == RawOrder::kAromatic && needs_pi[b.a] && needs_pi[b.b]) {
        arom_adj[b.a].push_back(b.b);
        arom_adj[b.b].push_back(b.a);
      }
    }
    if (!match_pi(0, needs_pi, arom_adj, match)) {
      std::size_t pos = 0;
      for (int v = 0; v < n; ++v)
        if (needs_pi[v]) pos = atoms_[v].pos;
      throw ParseError("cannot kekulize: no alternating bond assignment", pos);
    }
    for (auto& b : bonds_) {
      if (b.order != RawOrder::kAromatic) continue;
      bool matched = match[b.a] == b.b;
      b.order = matched ? RawOrder::kDouble : RawOrder::kSingle;
    }
  }

  bool match_pi(int v, const std::vector<char>& needs_pi,
                const std::vector<std::vector<int>>& adj, std::vector<int>& match) {
    int n = static_cast<int>(atoms_.size());
    while (v < n && (!needs_pi[v] || match[v] >= 0)) ++v;
    if (v >= n) return true;
    for (int u : adj[v]) {
      if (match[u] >= 0) continue;
      match[v] = u;
      match[u] = v;
      if (match_pi(v + 1, needs_pi, adj, match)) return true;
      match[v] = match[u] = -1;
    }
    return false;
  }

  void resolve_hydrogens() {
    std::vector<int> weight_sum(atoms_.size(), 0);
    for (const auto& b : bonds_) {
      int w = b.order == RawOrder::kDouble ? 2 : b.order == RawOrder::kTriple ? 3 : 1;
      weight_sum[b.a] += w;
      weight_sum[b.b] += w;
    }
    for (std::size_t v = 0; v < atoms_.size(); ++v) {
      RawAtom& a = atoms_[v];
      if (a.bracket || a.aromatic) {
        a.implicit_h = a.explicit_h;
      } else {
        const auto& defaults = default_valences(a.element);
        int target = -1;
        for (int d : defaults)
          if (d >= weight_sum[v]) {
            target = d;
            break;
          }
        if (target < 0)
          throw ParseError("valence overflow on " + a.element + " (bond weight " +
                               std::to_string(weight_sum[v]) + ")",
                           a.pos);
        a.implicit_h = target - weight_sum[v];
      }
      a.total_valence = weight_sum[v] + a.implicit_h;
      if (a.total_valence < 1 || a.total_valence > kMaxValence)
        throw ParseError("total valence " + std::to_string(a.total_valence) +
                             " outside [1, " + std::to_string(kMaxValence) + "]",
                         a.pos);
    }
  }

  MolecularGraph build_graph() const {
    MolecularGraph g;
    g.set_representation(rep_);
    for (const auto& a : atoms_) {
      AtomLabel label;
      label.rep = rep_;
      label.element = a.element;
      if (rep_ != Representation::kElement) {
        label.total_valence = a.total_valence;
        label.formal_charge = a.charge;
      }
      if (rep_ == Representation::kChiral) label.chiral_tag = a.chiral;
      g.add_atom({label, a.total_valence, a.implicit_h});
    }
    for (const auto& b : bonds_) {
      BondOrder order = b.order == RawOrder::kDouble   ? BondOrder::kDouble
                        : b.order == RawOrder::kTriple ? BondOrder::kTriple
                                                       : BondOrder::kSingle;
      g.add_bond(b.a, b.b, order);
    }
    return g;
  }

  const std::string& text_;
  Representation rep_;
  std::size_t i_ = 0;
  std::vector<RawAtom> atoms_;
  std::vector<RawBond> bonds_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> branch_stack_;
  std::map<int, RingSlot> ring_slots_;
  int prev_atom_ = -1;
  RawOrder pending_ = RawOrder::kNone;
};

}  // namespace

const std::vector<int>& default_valences(const std::string& element) {
  static const std::vector<int> kEmpty;
  auto it = kDefaultValences.find(element);
  return it == kDefaultValences.end() ? kEmpty : it->second;
}

bool is_known_element(const std::string& symbol) { return kKnownElements.count(symbol) > 0; }

MolecularGraph parse_smiles(const std::string& text, Representation rep) {
  return Parser(text, rep).run();
}

AtomLabel AtomLabel::from_string(const std::string& text, Representation rep) {
  AtomLabel label;
  label.rep = rep;
  std::size_t i = 0;
  while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
  label.element = text.substr(0, i);
  if (label.element.empty() || !is_known_element(label.element))
    throw std::invalid_argument("bad atom label '" + text + "'");
  if (rep == Representation::kElement) {
    if (i != text.size()) throw std::invalid_argument("bad atom label '" + text + "'");
    return label;
  }
  std::size_t open = text.find('(', i);
  std::size_t close = text.find(')', i);
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw std::invalid_argument("bad atom label '" + text + "'");
  label.total_valence = std::stoi(text.substr(i, open - i));
  label.formal_charge = std::stoi(text.substr(open + 1, close - open - 1));
  if (rep == Representation::kChiral) {
    label.chiral_tag = text.substr(close + 1);
    if (!label.chiral_tag.empty() && label.chiral_tag != "@" && label.chiral_tag != "@@")
      throw std::invalid_argument("bad chiral tag in '" + text + "'");
  } else if (close + 1 != text.size()) {
    throw std::invalid_argument("bad atom label '" + text + "'");
  }
  return label;
}

}  // namespace molvae::chem
