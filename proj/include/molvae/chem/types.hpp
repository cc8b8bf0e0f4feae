#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace molvae::chem {

// Atom label representations, mirroring the three ablation levels:
//   1: element only
//   2: element + total valence + formal charge
//   3: representation 2 + chiral tag
enum class Representation : int { kElement = 1, kValenceCharge = 2, kChiral = 3 };

inline Representation representation_from_int(int r) {
  if (r < 1 || r > 3) throw std::invalid_argument("representation must be 1, 2 or 3");
  return static_cast<Representation>(r);
}

constexpr int kMaxValence = 8;

enum class BondOrder : int { kSingle = 1, kDouble = 2, kTriple = 3 };

// Edge weight we(l): 1 for single, 2 for double, 3 for triple bonds.
inline int bond_weight(BondOrder o) { return static_cast<int>(o); }

inline BondOrder bond_order_from_weight(int w) {
  if (w < 1 || w > 3) throw std::invalid_argument("bond weight must be 1, 2 or 3");
  return static_cast<BondOrder>(w);
}

// Node label. Which fields participate in identity depends on the
// representation the label was built for; unused fields are zeroed so that
// labels of one representation compare consistently.
struct AtomLabel {
  std::string element;
  int total_valence = 0;   // representation >= 2
  int formal_charge = 0;   // representation >= 2
  std::string chiral_tag;  // representation 3; "" | "@" | "@@"
  Representation rep = Representation::kElement;

  // Text form used in vocabularies: "C", "C4(0)", "O3(1)@@".
  std::string to_string() const {
    if (rep == Representation::kElement) return element;
    std::string s = element + std::to_string(total_valence) + "(" +
                    std::to_string(formal_charge) + ")";
    if (rep == Representation::kChiral) s += chiral_tag;
    return s;
  }

  static AtomLabel from_string(const std::string& text, Representation rep);

  friend bool operator==(const AtomLabel& a, const AtomLabel& b) {
    return a.rep == b.rep && a.element == b.element &&
           a.total_valence == b.total_valence && a.formal_charge == b.formal_charge &&
           a.chiral_tag == b.chiral_tag;
  }
  friend bool operator<(const AtomLabel& a, const AtomLabel& b) {
    return a.to_string() < b.to_string();
  }
};

struct Bond {
  int a = 0;  // lower atom index
  int b = 0;  // higher atom index
  BondOrder order = BondOrder::kSingle;

  friend bool operator==(const Bond& x, const Bond& y) {
    return x.a == y.a && x.b == y.b && x.order == y.order;
  }
};

struct Atom {
  AtomLabel label;
  // Valence capacity nu_v: total valence resolved at parse time for
  // representation >= 2, or assigned from the element valence table for
  // representation 1 graphs produced by the decoder.
  int valence = 0;
  int implicit_h = 0;  // set by complete_hydrogens
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace molvae::chem
