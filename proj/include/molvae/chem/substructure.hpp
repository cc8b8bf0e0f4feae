#pragma once

#include <string>
#include <vector>

#include "molvae/chem/graph.hpp"
#include "molvae/core/rng.hpp"

namespace molvae::chem {

// Canonical key for a small labeled subgraph: isomorphic fragments map to
// identical keys.
using SubstructureKey = std::string;

// Keys of `count` fragments, each the subgraph induced by the atoms of a
// random walk of at most `walk_len` edges. Deterministic given the rng state.
std::vector<SubstructureKey> sample_substructures(const MolecularGraph& g, int count,
                                                  int walk_len, Rng& rng);

}  // namespace molvae::chem
