#pragma once

#include <string>

#include "molvae/chem/graph.hpp"
#include "molvae/chem/types.hpp"

namespace molvae::chem {

// Parses a SMILES string into a molecular graph. Supported grammar: organic
// subset atoms, bracket atoms with H count, charge and @/@@ tags, branches,
// ring closures (digits and %nn), bond symbols - = # : / \. Aromatic input
// is kekulized by a deterministic matching; failures throw ParseError.
// The representation controls which label fields are retained.
MolecularGraph parse_smiles(const std::string& text, Representation rep);

// Deterministic canonical SMILES: the lexicographically smallest string over
// all DFS writings of the graph. Invariant under atom relabeling and
// idempotent through a parse/write round trip.
std::string write_canonical_smiles(const MolecularGraph& g);

// Writes the graph in its stored atom order (DFS by atom index). Used by the
// canonical writer and directly by tests.
std::string write_smiles_in_order(const MolecularGraph& g);

// Default valence list for an organic-subset element, lowest first
// (e.g. S -> {2, 4, 6}). Empty if the element has no default.
const std::vector<int>& default_valences(const std::string& element);

bool is_known_element(const std::string& symbol);

}  // namespace molvae::chem
