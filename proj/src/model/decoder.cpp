#include "molvae/model/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace molvae::model {

namespace op = molvae::ops;

namespace {

// Masked choice from a logit row (values, not tape nodes). Sampling uses the
// masked softmax; argmax takes the lowest-index maximum among allowed slots.
template <class S>
int choose(const Tensor<S>& logits_row, const std::vector<char>& allowed, DecodeMode mode,
           Rng* rng) {
  long n = logits_row.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < n; ++i)
    if (allowed[i]) mx = std::max(mx, static_cast<double>(logits_row[i]));
  if (mx == -std::numeric_limits<double>::infinity())
    throw std::logic_error("no feasible choice under mask");
  if (mode == DecodeMode::kArgmax) {
    for (long i = 0; i < n; ++i)
      if (allowed[i] && static_cast<double>(logits_row[i]) == mx) return static_cast<int>(i);
  }
  std::vector<double> w(n, 0.0);
  for (long i = 0; i < n; ++i)
    if (allowed[i]) w[i] = std::exp(static_cast<double>(logits_row[i]) - mx);
  return static_cast<int>(rng->categorical(w));
}

}  // namespace

template <class S>
AtomDecode<S> decode_atoms(ForwardContext<S>& ctx, Var<S> z,
                           const chem::ValenceHistogram& alpha0, DecodeMode mode, Rng* rng) {
  Model<S>& model = ctx.model();
  const int nu = model.nu();
  const int m = static_cast<int>(z.rows());
  const bool conditioned = model.config.histograms;
  if (conditioned && alpha0.total() != m)
    throw std::invalid_argument("histogram total does not match atom count");
  if (mode == DecodeMode::kSample && rng == nullptr)
    throw std::invalid_argument("sampling requires an rng");

  const std::vector<int> valences = model.label_valences();
  std::vector<int> alpha_u(nu, 0);
  std::vector<int> alpha_fixed(nu, 0);
  for (std::size_t i = 0; i < alpha0.counts.size() && i < static_cast<std::size_t>(nu); ++i)
    alpha_fixed[i] = alpha0.counts[i];

  AtomDecode<S> out;
  std::vector<Var<S>> r_rows, logit_rows;
  for (int t = 0; t < m; ++t) {
    std::vector<int> alpha_d(nu, 0);
    for (int i = 0; i < nu; ++i) alpha_d[i] = alpha_fixed[i] - alpha_u[i];

    Tensor<S> cond(1, 2 * nu);
    if (conditioned)
      for (int i = 0; i < nu; ++i) {
        cond[i] = static_cast<S>(alpha_d[i]);
        cond[nu + i] = static_cast<S>(alpha_u[i]);
      }
    Var<S> z_t = op::slice_rows(z, t, 1);
    Var<S> k_in = op::concat_cols<S>({z_t, z.tape->constant(std::move(cond))});
    Var<S> e_t = op::tanh_(ctx.linear(k_in, "dec.K"));
    Var<S> r_t = op::concat_cols<S>({z_t, e_t});
    Var<S> logits =
        ctx.linear(op::leaky_relu(ctx.linear(r_t, "dec.F.h")), "dec.F.out");

    std::vector<char> allowed(model.num_labels(), 1);
    if (conditioned)
      for (int j = 0; j < model.num_labels(); ++j)
        allowed[j] = alpha_d[valences[j] - 1] > 0 ? 1 : 0;
    int type = choose(logits.val(), allowed, mode, rng);
    alpha_u[valences[type] - 1] += 1;

    r_rows.push_back(r_t);
    logit_rows.push_back(logits);
    out.types.push_back(type);
    out.step_masks.push_back(std::move(allowed));
  }
  out.r_raw = op::concat_rows(r_rows);
  out.atom_logits = op::concat_rows(logit_rows);
  return out;
}

template <class S>
Var<S> pair_basis(ForwardContext<S>& ctx, Var<S> r_bn, const std::vector<int>& types) {
  Var<S> tau_embed = op::gather_rows(ctx.param("enc.embed"), types);
  return op::concat_cols<S>({r_bn, tau_embed});
}

template <class S>
Var<S> pair_features(Var<S> s, Var<S> sum_rows, const std::vector<int>& idx_a,
                     const std::vector<int>& idx_b, const std::vector<int>& pair_mol) {
  Var<S> sa = op::gather_rows(s, idx_a);
  Var<S> sb = op::gather_rows(s, idx_b);
  Var<S> total = op::gather_rows(sum_rows, pair_mol);
  return op::concat_cols<S>({op::add(sa, sb), op::mul(sa, sb), total});
}

template <class S>
EdgeLogits<S> edge_nets(ForwardContext<S>& ctx, Var<S> phi) {
  auto mlp = [&](const char* name) {
    Var<S> h = op::leaky_relu(ctx.linear(phi, std::string(name) + ".h1"));
    h = op::leaky_relu(ctx.linear(h, std::string(name) + ".h2"));
    return ctx.linear(h, std::string(name) + ".out");
  };
  return {mlp("dec.C"), mlp("dec.L")};
}

template <class S>
Var<S> edge_features(ForwardContext<S>& ctx, Var<S> r_bn, const std::vector<int>& types) {
  const int m = static_cast<int>(r_bn.rows());
  Var<S> s = pair_basis(ctx, r_bn, types);
  std::vector<int> zero_seg(m, 0);
  Var<S> sum_rows = op::scatter_add_rows(s, zero_seg, 1);
  std::vector<int> ia, ib, pm;
  for (int v = 0; v < m; ++v)
    for (int u = 0; u < m; ++u) {
      ia.push_back(v);
      ib.push_back(u);
      pm.push_back(0);
    }
  return pair_features(s, sum_rows, ia, ib, pm);
}

EdgeMasks edge_masks(const std::vector<int>& remaining,
                     const std::vector<std::pair<int, int>>& bonded, int m,
                     const std::vector<chem::BondOrder>& bond_types) {
  EdgeMasks masks;
  masks.m = m;
  masks.d_e = static_cast<int>(bond_types.size());
  masks.exist.assign(static_cast<std::size_t>(m) * m, 1);
  for (int v = 0; v < m; ++v) masks.exist[v * m + v] = 0;
  for (auto [a, b] : bonded) {
    masks.exist[a * m + b] = 0;
    masks.exist[b * m + a] = 0;
  }
  masks.type.assign(static_cast<std::size_t>(m) * m * masks.d_e, 0);
  for (int v = 0; v < m; ++v)
    for (int u = 0; u < m; ++u) {
      if (!masks.exist[v * m + u]) continue;
      for (int l = 0; l < masks.d_e; ++l) {
        int w = chem::bond_weight(bond_types[l]);
        if (remaining[u] >= w && remaining[v] >= w)
          masks.type[(static_cast<std::size_t>(v) * m + u) * masks.d_e + l] = 1;
      }
    }
  return masks;
}

template <class S>
EdgeProbabilities<S> edge_probabilities(const Tensor<S>& exist_logits,
                                        const Tensor<S>& type_logits, const EdgeMasks& masks) {
  const int m = masks.m;
  const int de = masks.d_e;
  EdgeProbabilities<S> out;
  out.exist = Tensor<S>(m, m);
  out.type = Tensor<S>(static_cast<long>(m) * m, de);
  for (long p = 0; p < static_cast<long>(m) * m; ++p) {
    if (masks.exist[p]) {
      S x = exist_logits[p];
      out.exist[p] = S(1) / (S(1) + std::exp(-x));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < de; ++l)
      if (masks.type[p * de + l]) mx = std::max(mx, static_cast<double>(type_logits.at(p, l)));
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0;
    for (int l = 0; l < de; ++l)
      if (masks.type[p * de + l]) z += std::exp(static_cast<double>(type_logits.at(p, l)) - mx);
    for (int l = 0; l < de; ++l)
      if (masks.type[p * de + l])
        out.type.at(p, l) =
            static_cast<S>(std::exp(static_cast<double>(type_logits.at(p, l)) - mx) / z);
  }
  return out;
}

template <class S>
chem::MolecularGraph assemble_molecule(const chem::Vocabulary& vocab,
                                       const std::vector<int>& types,
                                       const Tensor<S>& p_exist_upper,
                                       const Tensor<S>& type_logits,
                                       const std::vector<std::pair<int, int>>& pairs,
                                       DecodeMode mode, Rng* rng) {
  const int m = static_cast<int>(types.size());
  std::vector<int> remaining;
  remaining.reserve(m);
  for (int t : types) remaining.push_back(vocab.label_valence(t));

  // candidate pairs above threshold, by descending probability then (v, u)
  std::vector<int> order;
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (static_cast<double>(p_exist_upper[p]) > 0.5) order.push_back(static_cast<int>(p));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (p_exist_upper[a] != p_exist_upper[b]) return p_exist_upper[a] > p_exist_upper[b];
    return pairs[a] < pairs[b];
  });

  chem::MolecularGraph g;
  g.set_representation(vocab.representation);
  for (int t : types) {
    chem::Atom atom;
    atom.label = vocab.labels[t];
    atom.valence = vocab.label_valence(t);
    g.add_atom(atom);
  }
  for (int p : order) {
    auto [v, u] = pairs[p];
    std::vector<char> feasible(vocab.num_bond_types(), 0);
    bool any = false;
    for (int l = 0; l < vocab.num_bond_types(); ++l) {
      int w = chem::bond_weight(vocab.bond_types[l]);
      if (remaining[v] >= w && remaining[u] >= w) {
        feasible[l] = 1;
        any = true;
      }
    }
    if (!any) continue;  // every type violates the constraints: discard
    Tensor<S> row(1, vocab.num_bond_types());
    for (int l = 0; l < vocab.num_bond_types(); ++l) row[l] = type_logits.at(p, l);
    int l = choose(row, feasible, mode, rng);
    int w = chem::bond_weight(vocab.bond_types[l]);
    g.add_bond(v, u, vocab.bond_types[l]);
    remaining[v] -= w;
    remaining[u] -= w;
  }
  chem::complete_hydrogens(g);
  return g;
}

template <class S>
Var<S> predict_properties(ForwardContext<S>& ctx, Var<S> s,
                          const std::vector<int>& mol_of_row, int num_mols,
                          const std::string& property) {
  Model<S>& model = ctx.model();
  bool known = false;
  for (const auto& p : model.config.properties) known |= p == property;
  if (!known) throw std::out_of_range("unknown property " + property);
  Var<S> x = op::leaky_relu(ctx.linear(s, "opt.F"));
  Var<S> gate = op::mul(op::sigmoid_(ctx.linear(x, "opt." + property + ".q1")),
                        op::tanh_(ctx.linear(x, "opt." + property + ".q2")));
  Var<S> per_mol = op::scatter_add_rows(gate, mol_of_row, num_mols);  // B x 64
  Tensor<S> ones(Dims::kOptGate, 1);
  for (long i = 0; i < ones.size(); ++i) ones[i] = S(1);
  Var<S> summed = op::matmul(per_mol, s.tape->constant(std::move(ones)));  // B x 1
  return op::sigmoid_(summed);
}

namespace {

// Shared no-grad forward producing the pair decode of one molecule.
template <class S>
struct MoleculeForward {
  Tape<S> tape;
  std::unique_ptr<ForwardContext<S>> ctx;
  AtomDecode<S> atoms;
  Var<S> s;
  std::vector<std::pair<int, int>> pairs;
  EdgeLogits<S> logits;

  MoleculeForward(Model<S>& model, const Tensor<S>& z, const chem::ValenceHistogram& alpha0,
                  DecodeMode atom_mode, Rng* rng, bool with_grad) {
    ctx = std::make_unique<ForwardContext<S>>(tape, model, /*training=*/false, with_grad);
    Var<S> zv = tape.leaf(z.clone(), with_grad);
    atoms = decode_atoms(*ctx, zv, alpha0, atom_mode, rng);
    Var<S> r_bn = ctx->batch_norm(atoms.r_raw, "dec.rbn");
    s = pair_basis(*ctx, r_bn, atoms.types);
    const int m = static_cast<int>(z.rows());
    std::vector<int> zeros(m, 0), ia, ib, pm;
    for (int v = 0; v < m; ++v)
      for (int u = v + 1; u < m; ++u) {
        pairs.emplace_back(v, u);
        ia.push_back(v);
        ib.push_back(u);
        pm.push_back(0);
      }
    if (!pairs.empty()) {
      Var<S> sum_rows = op::scatter_add_rows(s, zeros, 1);
      Var<S> phi = pair_features(s, sum_rows, ia, ib, pm);
      logits = edge_nets(*ctx, phi);
    }
    z_var = zv;
  }

  Var<S> z_var;
};

}  // namespace

template <class S>
DecodedMolecule<S> decode_molecule(Model<S>& model, const Tensor<S>& z,
                                   const chem::ValenceHistogram& alpha0,
                                   DecodeMode atom_mode, DecodeMode bond_mode, Rng* rng) {
  MoleculeForward<S> fwd(model, z, alpha0, atom_mode, rng, /*with_grad=*/false);
  Tensor<S> exist_probs(static_cast<long>(fwd.pairs.size()), 1);
  Tensor<S> type_logits(static_cast<long>(fwd.pairs.size()),
                        std::max(model.num_bond_types(), 1));
  for (std::size_t p = 0; p < fwd.pairs.size(); ++p) {
    S x = fwd.logits.exist.val()[static_cast<long>(p)];
    exist_probs[static_cast<long>(p)] = S(1) / (S(1) + std::exp(-x));
    for (int l = 0; l < model.num_bond_types(); ++l)
      type_logits.at(static_cast<long>(p), l) = fwd.logits.type.val().at(static_cast<long>(p), l);
  }
  DecodedMolecule<S> out;
  out.types = fwd.atoms.types;
  out.graph = assemble_molecule(model.vocab, fwd.atoms.types, exist_probs, type_logits,
                                fwd.pairs, bond_mode, rng);
  return out;
}

template <class S>
double predict_property(Model<S>& model, const Tensor<S>& z,
                        const chem::ValenceHistogram& alpha0, const std::string& property) {
  MoleculeForward<S> fwd(model, z, alpha0, DecodeMode::kArgmax, nullptr, /*with_grad=*/false);
  std::vector<int> zeros(z.rows(), 0);
  Var<S> pred = predict_properties(*fwd.ctx, fwd.s, zeros, 1, property);
  return static_cast<double>(pred.val()[0]);
}

template <class S>
std::pair<Tensor<S>, OptimizeTrace<S>> optimize_latent(Model<S>& model, Tensor<S> z0,
                                                       const chem::ValenceHistogram& alpha0,
                                                       const std::string& property, int steps,
                                                       double step_size) {
  Tensor<S> z = z0.clone();
  OptimizeTrace<S> trace;
  for (int k = 0; k <= steps; ++k) {
    bool last = k == steps;
    MoleculeForward<S> fwd(model, z, alpha0, DecodeMode::kArgmax, nullptr,
                           /*with_grad=*/!last);
    std::vector<int> zeros(z.rows(), 0);
    Var<S> pred = predict_properties(*fwd.ctx, fwd.s, zeros, 1, property);
    trace.predicted.push_back(static_cast<double>(pred.val()[0]));

    Tensor<S> exist_probs(static_cast<long>(fwd.pairs.size()), 1);
    Tensor<S> type_logits(static_cast<long>(fwd.pairs.size()),
                          std::max(model.num_bond_types(), 1));
    for (std::size_t p = 0; p < fwd.pairs.size(); ++p) {
      S x = fwd.logits.exist.val()[static_cast<long>(p)];
      exist_probs[static_cast<long>(p)] = S(1) / (S(1) + std::exp(-x));
      for (int l = 0; l < model.num_bond_types(); ++l)
        type_logits.at(static_cast<long>(p), l) =
            fwd.logits.type.val().at(static_cast<long>(p), l);
    }
    trace.molecules.push_back(assemble_molecule(model.vocab, fwd.atoms.types, exist_probs,
                                                type_logits, fwd.pairs, DecodeMode::kArgmax,
                                                nullptr));
    if (last) break;

    fwd.tape.backward(pred);
    if (!fwd.tape.has_grad(fwd.z_var.id))
      throw std::runtime_error("no gradient reached the latent codes");
    const Tensor<S>& g = fwd.tape.grad(fwd.z_var.id);
    for (long i = 0; i < z.size(); ++i) {
      if (!std::isfinite(static_cast<double>(g[i])))
        throw std::runtime_error("non-finite latent gradient at iterate " + std::to_string(k));
      z[i] += static_cast<S>(step_size) * g[i];
    }
  }
  return {std::move(z), std::move(trace)};
}

#define MOLVAE_INSTANTIATE(S)                                                              \
  template struct AtomDecode<S>;                                                           \
  template AtomDecode<S> decode_atoms(ForwardContext<S>&, Var<S>,                          \
                                      const chem::ValenceHistogram&, DecodeMode, Rng*);    \
  template Var<S> pair_basis(ForwardContext<S>&, Var<S>, const std::vector<int>&);         \
  template Var<S> pair_features(Var<S>, Var<S>, const std::vector<int>&,                   \
                                const std::vector<int>&, const std::vector<int>&);         \
  template EdgeLogits<S> edge_nets(ForwardContext<S>&, Var<S>);                            \
  template Var<S> edge_features(ForwardContext<S>&, Var<S>, const std::vector<int>&);      \
  template EdgeProbabilities<S> edge_probabilities(const Tensor<S>&, const Tensor<S>&,     \
                                                   const EdgeMasks&);                      \
  template chem::MolecularGraph assemble_molecule(                                         \
      const chem::Vocabulary&, const std::vector<int>&, const Tensor<S>&,                  \
      const Tensor<S>&, const std::vector<std::pair<int, int>>&, DecodeMode, Rng*);        \
  template Var<S> predict_properties(ForwardContext<S>&, Var<S>, const std::vector<int>&,  \
                                     int, const std::string&);                             \
  template DecodedMolecule<S> decode_molecule(Model<S>&, const Tensor<S>&,                 \
                                              const chem::ValenceHistogram&, DecodeMode,   \
                                              DecodeMode, Rng*);                           \
  template double predict_property(Model<S>&, const Tensor<S>&,                            \
                                   const chem::ValenceHistogram&, const std::string&);     \
  template std::pair<Tensor<S>, OptimizeTrace<S>> optimize_latent(                         \
      Model<S>&, Tensor<S>, const chem::ValenceHistogram&, const std::string&, int, double);

MOLVAE_INSTANTIATE(float)
MOLVAE_INSTANTIATE(double)
#undef MOLVAE_INSTANTIATE

}  // namespace molvae::model
