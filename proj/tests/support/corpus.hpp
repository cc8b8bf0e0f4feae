#pragma once

#include <string>
#include <vector>

#include "molvae/chem/graph.hpp"
#include "molvae/core/rng.hpp"

namespace molvae::testing {

// Random valence-consistent molecule over the QM9 alphabet (C, N, O, F,
// single/double/triple bonds, up to max_atoms heavy atoms). Connected.
chem::MolecularGraph random_molecule(Rng& rng, int max_atoms,
                                     chem::Representation rep);

// Newline-delimited corpus of `n` random molecules written as SMILES with a
// property column (heteroatom fraction in [0, 1]).
std::string random_corpus(std::uint64_t seed, int n, int max_atoms);

// Applies a permutation to atom indices: atom i of the result is atom
// perm[i] of g.
chem::MolecularGraph permute_atoms(const chem::MolecularGraph& g,
                                   const std::vector<int>& perm);

}  // namespace molvae::testing
