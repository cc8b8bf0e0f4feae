#pragma once

#include <vector>

#include "molvae/chem/graph.hpp"
#include "molvae/core/rng.hpp"
#include "molvae/model/forward.hpp"

namespace molvae::model {

// A batch of molecules flattened into one node table with per-bond-type
// directed edge lists; node order concatenates the molecules' atom orders.
struct BatchGraph {
  int num_nodes = 0;
  int num_mols = 0;
  std::vector<int> label_ids;
  std::vector<int> mol_of_node;
  std::vector<int> offsets;  // per molecule
  std::vector<int> sizes;
  // per (vocabulary) bond type: directed (src, dst) pairs, both directions
  std::vector<std::vector<std::pair<int, int>>> edges_by_type;
};

BatchGraph make_batch(const std::vector<const chem::MolecularGraph*>& mols,
                      const chem::Vocabulary& vocab);

template <class S>
struct EncoderOutput {
  Var<S> mu;      // N x s_lt
  Var<S> logvar;  // N x s_lt, clamped pre-exponential of sigma^2
};

// Initial node embeddings h^(1) = W(label).
template <class S>
Var<S> embed_nodes(ForwardContext<S>& ctx, const BatchGraph& batch);

// One message-passing layer (k in 1..K). The relational variant transforms
// each neighbor state with the bond-type network before summing; the plain
// variant sums raw neighbor states.
template <class S>
Var<S> message_layer(ForwardContext<S>& ctx, Var<S> h, const BatchGraph& batch, int layer);

// mu and clamped log sigma^2 heads over the final hidden states.
template <class S>
EncoderOutput<S> encode(ForwardContext<S>& ctx, const BatchGraph& batch);

// z = mu + sigma * eta with eta given explicitly (N x s_lt).
template <class S>
Var<S> reparameterize(Var<S> mu, Var<S> logvar, Tensor<S> eta);

// Standard-normal noise tensor of the given shape.
template <class S>
Tensor<S> normal_noise(long rows, long cols, Rng& rng);

}  // namespace molvae::model
