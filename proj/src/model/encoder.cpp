#include "molvae/model/encoder.hpp"

#include <stdexcept>

namespace molvae::model {

namespace op = molvae::ops;

BatchGraph make_batch(const std::vector<const chem::MolecularGraph*>& mols,
                      const chem::Vocabulary& vocab) {
  BatchGraph b;
  b.num_mols = static_cast<int>(mols.size());
  b.edges_by_type.resize(vocab.num_bond_types());
  for (const auto* g : mols) {
    b.offsets.push_back(b.num_nodes);
    b.sizes.push_back(g->num_atoms());
    auto ids = vocab.label_indices(*g);
    for (int i = 0; i < g->num_atoms(); ++i) {
      b.label_ids.push_back(ids[i]);
      b.mol_of_node.push_back(static_cast<int>(b.offsets.size()) - 1);
    }
    for (const auto& bond : g->bonds()) {
      int type = -1;
      for (int t = 0; t < vocab.num_bond_types(); ++t)
        if (vocab.bond_types[t] == bond.order) type = t;
      if (type < 0) throw std::out_of_range("bond type not in vocabulary");
      int a = b.num_nodes + bond.a, c = b.num_nodes + bond.b;
      b.edges_by_type[type].emplace_back(a, c);
      b.edges_by_type[type].emplace_back(c, a);
    }
    b.num_nodes += g->num_atoms();
  }
  return b;
}

template <class S>
Var<S> embed_nodes(ForwardContext<S>& ctx, const BatchGraph& batch) {
  return op::gather_rows(ctx.param("enc.embed"), batch.label_ids);
}

template <class S>
Var<S> message_layer(ForwardContext<S>& ctx, Var<S> h, const BatchGraph& batch, int layer) {
  std::string lk = "enc.l" + std::to_string(layer);
  bool relational = ctx.model().config.encoder == EncoderKind::kRGIN;

  Var<S> messages;  // sum over incoming transformed neighbor states
  bool have_messages = false;
  if (relational) {
    for (std::size_t t = 0; t < batch.edges_by_type.size(); ++t) {
      const auto& edges = batch.edges_by_type[t];
      if (edges.empty()) continue;
      Var<S> transformed =
          op::leaky_relu(ctx.linear(h, lk + ".edge" + std::to_string(t)));
      std::vector<int> srcs, dsts;
      srcs.reserve(edges.size());
      dsts.reserve(edges.size());
      for (auto [s, d] : edges) {
        srcs.push_back(s);
        dsts.push_back(d);
      }
      Var<S> contrib =
          op::scatter_add_rows(op::gather_rows(transformed, srcs), dsts, batch.num_nodes);
      messages = have_messages ? op::add(messages, contrib) : contrib;
      have_messages = true;
    }
  } else {
    std::vector<int> srcs, dsts;
    for (const auto& edges : batch.edges_by_type)
      for (auto [s, d] : edges) {
        srcs.push_back(s);
        dsts.push_back(d);
      }
    if (!srcs.empty()) {
      messages = op::scatter_add_rows(op::gather_rows(h, srcs), dsts, batch.num_nodes);
      have_messages = true;
    }
  }

  // epsilon^(k) = 0, so the self term is h itself
  Var<S> pre = have_messages ? op::add(h, messages) : h;
  Var<S> hidden = op::leaky_relu(ctx.batch_norm(ctx.linear(pre, lk + ".agg.h"), lk + ".agg.bn"));
  return ctx.linear(hidden, lk + ".agg.out");
}

template <class S>
EncoderOutput<S> encode(ForwardContext<S>& ctx, const BatchGraph& batch) {
  Var<S> h = embed_nodes(ctx, batch);
  for (int k = 1; k <= Dims::kLayers; ++k) h = message_layer(ctx, h, batch, k);
  Var<S> mu = ctx.linear(op::leaky_relu(ctx.linear(h, "enc.mu.h")), "enc.mu.out");
  Var<S> logvar =
      op::clamp(ctx.linear(op::leaky_relu(ctx.linear(h, "enc.logvar.h")), "enc.logvar.out"),
                S(Dims::kSigmaClampLo), S(Dims::kSigmaClampHi));
  return {mu, logvar};
}

template <class S>
Var<S> reparameterize(Var<S> mu, Var<S> logvar, Tensor<S> eta) {
  Var<S> sigma = op::exp_(op::scale(logvar, S(0.5)));
  Var<S> noise = mu.tape->constant(std::move(eta));
  return op::add(mu, op::mul(sigma, noise));
}

template <class S>
Tensor<S> normal_noise(long rows, long cols, Rng& rng) {
  Tensor<S> t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.normal());
  return t;
}

template Var<float> embed_nodes(ForwardContext<float>&, const BatchGraph&);
template Var<double> embed_nodes(ForwardContext<double>&, const BatchGraph&);
template Var<float> message_layer(ForwardContext<float>&, Var<float>, const BatchGraph&, int);
template Var<double> message_layer(ForwardContext<double>&, Var<double>, const BatchGraph&, int);
template EncoderOutput<float> encode(ForwardContext<float>&, const BatchGraph&);
template EncoderOutput<double> encode(ForwardContext<double>&, const BatchGraph&);
template Var<float> reparameterize(Var<float>, Var<float>, Tensor<float>);
template Var<double> reparameterize(Var<double>, Var<double>, Tensor<double>);
template Tensor<float> normal_noise(long, long, Rng&);
template Tensor<double> normal_noise(long, long, Rng&);

}  // namespace molvae::model
