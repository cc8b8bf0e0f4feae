#pragma once

#include <string>

#include "molvae/chem/graph.hpp"

namespace molvae::testing {

// Independent reference writer: emits the SMILES of g with atoms taken in
// index order (DFS from atom 0, neighbors by ascending index). Shares no code
// with the production writer.
std::string oracle_write_in_order(const chem::MolecularGraph& g);

// Brute-force canonical form: minimum of oracle_write_in_order over all
// atom permutations. Only sensible for small graphs (m <= 8 or so).
std::string oracle_canonical(const chem::MolecularGraph& g);

}  // namespace molvae::testing
