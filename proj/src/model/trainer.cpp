#include "molvae/model/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "molvae/eval/metrics.hpp"

namespace molvae::model {

namespace op = molvae::ops;

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  TrainConfig cfg;
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    cfg.apply_line(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void TrainConfig::apply_line(const std::string& key, const std::string& value) {
  if (key.empty()) return;
  if (key == "lambda1") lambda1 = std::stod(value);
  else if (key == "lambda2") lambda2 = std::stod(value);
  else if (key == "learning_rate") learning_rate = std::stod(value);
  else if (key == "batch_size") batch_size = std::stoi(value);
  else if (key == "max_epochs") max_epochs = std::stoi(value);
  else if (key == "max_steps") max_steps = std::stol(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "representation") representation = std::stoi(value);
  else if (key == "encoder") encoder = value;
  else if (key == "histograms") histograms = value == "on" || value == "true" || value == "1";
  else if (key == "true_type_forcing") true_type_forcing = value == "on" || value == "true" || value == "1";
  else if (key == "precision") precision = value;
  else if (key == "stop_at_train_reconstruction") stop_at_train_reconstruction = std::stod(value);
  else if (key == "eval_every") eval_every = std::stol(value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "lambda1 = " << lambda1 << "\n";
  os << "lambda2 = " << lambda2 << "\n";
  os << "learning_rate = " << learning_rate << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "max_epochs = " << max_epochs << "\n";
  os << "max_steps = " << max_steps << "\n";
  os << "seed = " << seed << "\n";
  os << "representation = " << representation << "\n";
  os << "encoder = " << encoder << "\n";
  os << "histograms = " << (histograms ? "on" : "off") << "\n";
  os << "true_type_forcing = " << (true_type_forcing ? "on" : "off") << "\n";
  os << "precision = " << precision << "\n";
  os << "stop_at_train_reconstruction = " << stop_at_train_reconstruction << "\n";
  os << "eval_every = " << eval_every << "\n";
  return os.str();
}

PropertyNorms PropertyNorms::fit(const std::vector<chem::DatasetEntry>& entries,
                                 const std::vector<std::string>& names) {
  PropertyNorms n;
  n.names = names;
  n.min_value.assign(names.size(), std::numeric_limits<double>::infinity());
  n.max_value.assign(names.size(), -std::numeric_limits<double>::infinity());
  for (const auto& e : entries) {
    if (e.properties.size() < names.size())
      throw std::invalid_argument("dataset entry missing property columns");
    for (std::size_t c = 0; c < names.size(); ++c) {
      n.min_value[c] = std::min(n.min_value[c], e.properties[c]);
      n.max_value[c] = std::max(n.max_value[c], e.properties[c]);
    }
  }
  return n;
}

double PropertyNorms::normalize(int column, double raw) const {
  double lo = min_value[column], hi = max_value[column];
  if (!(hi > lo)) return 0.5;  // constant column
  double x = (raw - lo) / (hi - lo);
  return std::clamp(x, 0.0, 1.0);
}

void PropertyNorms::save(std::ostream& os) const {
  os << "properties " << names.size() << "\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    os << names[i] << ' ' << min_value[i] << ' ' << max_value[i] << "\n";
}

PropertyNorms PropertyNorms::load(std::istream& is) {
  PropertyNorms n;
  std::string word;
  std::size_t count = 0;
  is >> word >> count;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    double lo, hi;
    is >> name >> lo >> hi;
    n.names.push_back(name);
    n.min_value.push_back(lo);
    n.max_value.push_back(hi);
  }
  return n;
}

template <class S>
BatchLossResult<S> batch_loss(ForwardContext<S>& ctx,
                              const std::vector<const chem::DatasetEntry*>& batch,
                              const Tensor<S>& eta, const PropertyNorms& norms,
                              const TrainConfig& cfg) {
  Model<S>& model = ctx.model();
  Tape<S>& tape = ctx.tape();
  const int B = static_cast<int>(batch.size());
  const int dn = model.num_labels();
  const int de = model.num_bond_types();
  const auto valences = model.label_valences();
  static std::atomic<long> clamp_counter{0};
  long clamp_before = clamp_counter.load(std::memory_order_relaxed);

  std::vector<const chem::MolecularGraph*> graphs;
  for (const auto* e : batch) graphs.push_back(&e->graph);
  BatchGraph bg = make_batch(graphs, model.vocab);

  // encoder and latent draw
  EncoderOutput<S> enc = encode(ctx, bg);
  Var<S> z = reparameterize(enc.mu, enc.logvar, eta.clone());

  // teacher-forced atom decoding per molecule, argmax choices
  std::vector<AtomDecode<S>> decodes;
  std::vector<Var<S>> r_parts, logit_parts;
  for (int b = 0; b < B; ++b) {
    Var<S> z_seg = op::slice_rows(z, bg.offsets[b], bg.sizes[b]);
    auto alpha0 = model.vocab.molecule_histogram(*graphs[b]);
    decodes.push_back(decode_atoms(ctx, z_seg, alpha0, DecodeMode::kArgmax, nullptr));
    r_parts.push_back(decodes.back().r_raw);
    logit_parts.push_back(decodes.back().atom_logits);
  }
  Var<S> r_bn = ctx.batch_norm(op::concat_rows(r_parts), "dec.rbn");
  Var<S> atom_logits = op::concat_rows(logit_parts);

  // atom loss over the unmasked alphabet
  Tensor<S> ones_mask(bg.num_nodes, dn);
  Tensor<S> atom_onehot(bg.num_nodes, dn);
  for (int b = 0; b < B; ++b) {
    auto true_ids = model.vocab.label_indices(*graphs[b]);
    for (int i = 0; i < bg.sizes[b]; ++i)
      atom_onehot.at(bg.offsets[b] + i, true_ids[i]) = S(1);
  }
  for (long i = 0; i < ones_mask.size(); ++i) ones_mask[i] = S(1);
  Var<S> atom_probs = op::softmax_masked(atom_logits, std::move(ones_mask));
  Var<S> atom_ce = op::mul(op::clamped_log(atom_probs, S(1e-12), &clamp_counter),
                           tape.constant(std::move(atom_onehot)));
  Var<S> loss_atom = op::scale(op::sum_all(atom_ce), S(-1.0 / B));

  // edge basis: argmax-predicted types by default, ground truth when forced
  std::vector<int> basis_types;
  for (int b = 0; b < B; ++b) {
    if (cfg.true_type_forcing) {
      auto true_ids = model.vocab.label_indices(*graphs[b]);
      basis_types.insert(basis_types.end(), true_ids.begin(), true_ids.end());
    } else {
      basis_types.insert(basis_types.end(), decodes[b].types.begin(), decodes[b].types.end());
    }
  }
  Var<S> s = pair_basis(ctx, r_bn, basis_types);
  Var<S> mol_sums = op::scatter_add_rows(s, bg.mol_of_node, B);

  // unordered pairs per molecule, with global row indices
  std::vector<int> idx_a, idx_b, pair_mol;
  std::vector<std::pair<int, int>> local_pairs;  // molecule-local (v, u)
  std::vector<int> pair_of_mol_start(B + 1, 0);
  for (int b = 0; b < B; ++b) {
    int m = bg.sizes[b];
    for (int v = 0; v < m; ++v)
      for (int u = v + 1; u < m; ++u) {
        idx_a.push_back(bg.offsets[b] + v);
        idx_b.push_back(bg.offsets[b] + u);
        pair_mol.push_back(b);
        local_pairs.emplace_back(v, u);
      }
    pair_of_mol_start[b + 1] = static_cast<int>(idx_a.size());
  }
  const long P = static_cast<long>(idx_a.size());

  Var<S> loss_bond = tape.constant(Tensor<S>::scalar(S(0)));
  Var<S> loss_bond_type = tape.constant(Tensor<S>::scalar(S(0)));
  if (P > 0) {
    Var<S> phi = pair_features(s, mol_sums, idx_a, idx_b, pair_mol);
    EdgeLogits<S> nets = edge_nets(ctx, phi);

    // L_b: binary cross entropy over unordered pairs
    Tensor<S> adjacency(P, 1);
    for (long p = 0; p < P; ++p) {
      int b = pair_mol[p];
      auto [v, u] = local_pairs[p];
      if (graphs[b]->bond_between(v, u)) adjacency[p] = S(1);
    }
    loss_bond = op::scale(op::sum_all(op::bce_logits(nets.exist, std::move(adjacency))),
                          S(1.0 / B));

    // L_tb: type loss gated to true bonds, against the Eq-(11) masks of the
    // basis types' full capacities
    std::vector<int> bond_rows;
    std::vector<int> bond_true_type;
    for (long p = 0; p < P; ++p) {
      int b = pair_mol[p];
      auto [v, u] = local_pairs[p];
      auto order = graphs[b]->bond_between(v, u);
      if (!order) continue;
      int type = -1;
      for (int t = 0; t < de; ++t)
        if (model.vocab.bond_types[t] == *order) type = t;
      bond_rows.push_back(static_cast<int>(p));
      bond_true_type.push_back(type);
    }
    if (!bond_rows.empty()) {
      Var<S> type_logits = op::gather_rows(nets.type, bond_rows);
      Tensor<S> type_mask(static_cast<long>(bond_rows.size()), de);
      Tensor<S> type_onehot(static_cast<long>(bond_rows.size()), de);
      for (std::size_t i = 0; i < bond_rows.size(); ++i) {
        long p = bond_rows[i];
        auto [v, u] = local_pairs[p];
        int gv = idx_a[p], gu = idx_b[p];
        (void)v;
        (void)u;
        int cap_v = valences[basis_types[gv]];
        int cap_u = valences[basis_types[gu]];
        for (int l = 0; l < de; ++l) {
          int w = chem::bond_weight(model.vocab.bond_types[l]);
          if (cap_v >= w && cap_u >= w) type_mask.at(i, l) = S(1);
        }
        type_onehot.at(i, bond_true_type[i]) = S(1);
      }
      Var<S> type_probs = op::softmax_masked(type_logits, std::move(type_mask));
      Var<S> type_ce = op::mul(op::clamped_log(type_probs, S(1e-12), &clamp_counter),
                               tape.constant(std::move(type_onehot)));
      loss_bond_type = op::scale(op::sum_all(type_ce), S(-1.0 / B));
    }
  }

  // KL term
  Var<S> mu_sq = op::mul(enc.mu, enc.mu);
  Var<S> kl_inner = op::add_const(op::sub(enc.logvar, op::add(mu_sq, op::exp_(enc.logvar))), S(1));
  Var<S> loss_kl = op::scale(op::sum_all(kl_inner), S(-0.5 / B));

  // property loss
  Var<S> loss_prop = tape.constant(Tensor<S>::scalar(S(0)));
  if (cfg.lambda2 > 0 && !model.config.properties.empty()) {
    for (std::size_t c = 0; c < model.config.properties.size(); ++c) {
      Var<S> pred = predict_properties(ctx, s, bg.mol_of_node, B, model.config.properties[c]);
      Tensor<S> targets(B, 1);
      for (int b = 0; b < B; ++b)
        targets[b] = static_cast<S>(norms.normalize(static_cast<int>(c),
                                                    batch[b]->properties.at(c)));
      Var<S> diff = op::sub(pred, tape.constant(std::move(targets)));
      loss_prop = op::add(loss_prop, op::scale(op::sum_all(op::mul(diff, diff)), S(0.5 / B)));
    }
  }

  Var<S> total = op::add(
      op::add(op::add(loss_atom, loss_bond), loss_bond_type),
      op::add(op::scale(loss_kl, S(cfg.lambda1)), op::scale(loss_prop, S(cfg.lambda2))));

  BatchLossResult<S> out;
  out.total = total;
  out.values.atom = static_cast<double>(loss_atom.val()[0]);
  out.values.bond = static_cast<double>(loss_bond.val()[0]);
  out.values.bond_type = static_cast<double>(loss_bond_type.val()[0]);
  out.values.kl = static_cast<double>(loss_kl.val()[0]);
  out.values.property = static_cast<double>(loss_prop.val()[0]);
  out.values.total = static_cast<double>(total.val()[0]);
  out.values.log_clamps = clamp_counter.load(std::memory_order_relaxed) - clamp_before;
  return out;
}

template <class S>
TrainResult train(Model<S>& model, const std::vector<chem::DatasetEntry>& train_set,
                  const std::vector<chem::DatasetEntry>& valid_set, const TrainConfig& cfg,
                  const PropertyNorms& norms, std::ostream* metrics_csv,
                  const std::optional<std::string>& checkpoint_path) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  AdamOptimizer<S> adam({cfg.learning_rate});
  Rng shuffle_rng = Rng::derive(cfg.seed, 0xd5u);
  Rng noise_rng = Rng::derive(cfg.seed, 0x201fu);

  if (metrics_csv)
    (*metrics_csv) << "epoch,step,L_a,L_b,L_tb,L_lt,L_opt,total,val_reconstruction\n";

  TrainResult result;
  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  bool stop = false;
  for (int epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size() && !stop; begin += cfg.batch_size) {
      std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<const chem::DatasetEntry*> batch;
      int nodes = 0;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        nodes += train_set[order[i]].graph.num_atoms();
      }
      Tensor<S> eta = normal_noise<S>(nodes, Dims::kLatent, noise_rng);

      Tape<S> tape;
      ForwardContext<S> ctx(tape, model, /*training=*/true, /*with_grad=*/true);
      auto loss = batch_loss(ctx, batch, eta, norms, cfg);
      if (!std::isfinite(loss.values.total)) {
        std::ostringstream os;
        os << "non-finite loss at step " << result.steps + 1 << ": atom=" << loss.values.atom
           << " bond=" << loss.values.bond << " bond_type=" << loss.values.bond_type
           << " kl=" << loss.values.kl << " property=" << loss.values.property << "; batch:";
        for (const auto* e : batch) os << ' ' << e->smiles;
        throw std::runtime_error(os.str());
      }
      tape.backward(loss.total);
      adam.step(model.params, ctx.gradients());
      ++result.steps;
      result.last_loss = loss.values;

      bool check_now = cfg.eval_every > 0 && result.steps % cfg.eval_every == 0;
      if (cfg.stop_at_train_reconstruction > 0 && check_now) {
        double rate = eval::reconstruction_rate(model, train_set, 2, cfg.seed + 17);
        result.last_train_reconstruction = rate;
        if (rate >= cfg.stop_at_train_reconstruction) stop = true;
      }
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) stop = true;
      if (metrics_csv && (check_now || stop)) {
        (*metrics_csv) << epoch << ',' << result.steps << ',' << loss.values.atom << ','
                       << loss.values.bond << ',' << loss.values.bond_type << ','
                       << loss.values.kl << ',' << loss.values.property << ','
                       << loss.values.total << ',' << result.best_val_reconstruction << "\n";
      }
    }
    result.epochs = epoch;

    if (!valid_set.empty()) {
      double val = eval::reconstruction_rate(model, valid_set, 2, cfg.seed + 31);
      if (val > result.best_val_reconstruction) {
        result.best_val_reconstruction = val;
        if (checkpoint_path) model.save(*checkpoint_path);
      }
    }
  }
  if (checkpoint_path && valid_set.empty()) model.save(*checkpoint_path);
  return result;
}

#define MOLVAE_INSTANTIATE(S)                                                      \
  template BatchLossResult<S> batch_loss(ForwardContext<S>&,                       \
                                         const std::vector<const chem::DatasetEntry*>&, \
                                         const Tensor<S>&, const PropertyNorms&,   \
                                         const TrainConfig&);                      \
  template TrainResult train(Model<S>&, const std::vector<chem::DatasetEntry>&,    \
                             const std::vector<chem::DatasetEntry>&, const TrainConfig&, \
                             const PropertyNorms&, std::ostream*,                  \
                             const std::optional<std::string>&);

MOLVAE_INSTANTIATE(float)
MOLVAE_INSTANTIATE(double)
#undef MOLVAE_INSTANTIATE

}  // namespace molvae::model
