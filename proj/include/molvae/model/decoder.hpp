#pragma once

#include <string>
#include <utility>
#include <vector>

#include "molvae/chem/graph.hpp"
#include "molvae/core/rng.hpp"
#include "molvae/model/encoder.hpp"
#include "molvae/model/forward.hpp"

namespace molvae::model {

enum class DecodeMode { kSample, kArgmax };

// Per-molecule atom decoding record: step-wise representations and choices.
template <class S>
struct AtomDecode {
  Var<S> r_raw;        // m x 120, before the shared batch norm
  Var<S> atom_logits;  // m x d_n, unmasked
  std::vector<int> types;
  std::vector<std::vector<char>> step_masks;  // per step, 1 = label allowed
};

// Sequential atom decoding conditioned on the valence histogram. z holds the
// molecule's latent rows; alpha0 is the (fixed) target histogram. With
// histogram conditioning off the alpha inputs are zero and no mask applies;
// alpha0 then only fixes the atom count.
template <class S>
AtomDecode<S> decode_atoms(ForwardContext<S>& ctx, Var<S> z,
                           const chem::ValenceHistogram& alpha0, DecodeMode mode,
                           Rng* rng);

// s_v = concat(r_v, W(tau_v)) rows for all nodes (batch or single molecule).
template <class S>
Var<S> pair_basis(ForwardContext<S>& ctx, Var<S> r_bn, const std::vector<int>& types);

// phi rows for explicit (row_a, row_b) pairs: concat(s_a + s_b, s_a * s_b,
// sum_of_molecule). sum_rows holds per-molecule sums; pair_mol maps each pair
// to its molecule row.
template <class S>
Var<S> pair_features(Var<S> s, Var<S> sum_rows, const std::vector<int>& idx_a,
                     const std::vector<int>& idx_b, const std::vector<int>& pair_mol);

template <class S>
struct EdgeLogits {
  Var<S> exist;  // P x 1
  Var<S> type;   // P x d_e
};

template <class S>
EdgeLogits<S> edge_nets(ForwardContext<S>& ctx, Var<S> phi);

// Full m x m x 570 tensor for one molecule, flattened to (m*m) x 570 with
// row index v * m + u. Exactly symmetric in (v, u).
template <class S>
Var<S> edge_features(ForwardContext<S>& ctx, Var<S> r_bn, const std::vector<int>& types);

// Binary masks over ordered pairs given remaining capacities. exist[v*m+u]
// is 0 on the diagonal and on already-bonded pairs; type[(v*m+u)*d_e + l]
// additionally requires we(l) <= remaining capacity on both ends.
struct EdgeMasks {
  int m = 0;
  int d_e = 0;
  std::vector<char> exist;
  std::vector<char> type;
};
EdgeMasks edge_masks(const std::vector<int>& remaining,
                     const std::vector<std::pair<int, int>>& bonded, int m,
                     const std::vector<chem::BondOrder>& bond_types);

// Masked probabilities (plain values): P_exist = M^e * sigmoid(C), exactly 0
// where masked; P_type = masked softmax over types, all-zero rows where no
// type is feasible.
template <class S>
struct EdgeProbabilities {
  Tensor<S> exist;  // m x m
  Tensor<S> type;   // (m*m) x d_e
};
template <class S>
EdgeProbabilities<S> edge_probabilities(const Tensor<S>& exist_logits,
                                        const Tensor<S>& type_logits, const EdgeMasks& masks);

// Iterative bond placement: pairs above probability 0.5 in descending order,
// type drawn against running capacities, infeasible edges discarded,
// hydrogens completed at the end.
template <class S>
chem::MolecularGraph assemble_molecule(const chem::Vocabulary& vocab,
                                       const std::vector<int>& types,
                                       const Tensor<S>& p_exist_upper,  // P x 1
                                       const Tensor<S>& type_logits,    // P x d_e
                                       const std::vector<std::pair<int, int>>& pairs,
                                       DecodeMode mode, Rng* rng);

// sigma( sum_v sigma(Q1_p(x_v)) * tanh(Q2_p(x_v)) ) per molecule, x_v =
// F_opt(s_v). Returns a B x 1 tensor of property predictions.
template <class S>
Var<S> predict_properties(ForwardContext<S>& ctx, Var<S> s,
                          const std::vector<int>& mol_of_row, int num_mols,
                          const std::string& property);

// Whole-molecule decode from latent rows (no gradient). Atom and bond modes
// follow the protocol: sampling at generation, argmax at reconstruction.
template <class S>
struct DecodedMolecule {
  chem::MolecularGraph graph;
  std::vector<int> types;
};
template <class S>
DecodedMolecule<S> decode_molecule(Model<S>& model, const Tensor<S>& z,
                                   const chem::ValenceHistogram& alpha0,
                                   DecodeMode atom_mode, DecodeMode bond_mode, Rng* rng);

// Property prediction for a latent configuration (argmax atom decode).
template <class S>
double predict_property(Model<S>& model, const Tensor<S>& z,
                        const chem::ValenceHistogram& alpha0, const std::string& property);

// Gradient ascent on the predicted property with respect to Z; discrete
// choices are frozen within each iterate. Returns the final Z and the
// decoded trajectory (step 0 = initial point).
template <class S>
struct OptimizeTrace {
  std::vector<chem::MolecularGraph> molecules;
  std::vector<double> predicted;
};
template <class S>
std::pair<Tensor<S>, OptimizeTrace<S>> optimize_latent(Model<S>& model, Tensor<S> z0,
                                                       const chem::ValenceHistogram& alpha0,
                                                       const std::string& property, int steps,
                                                       double step_size);

}  // namespace molvae::model
