#include "molvae/model/params.hpp"

#include <sstream>
#include <stdexcept>

namespace molvae::model {

namespace {

template <class S>
void add_linear(ParamStore<S>& store, Rng& rng, const std::string& prefix, long in, long out) {
  store.add(prefix + ".w", xavier_init<S>(in, out, rng));
  store.add(prefix + ".b", Tensor<S>(1, out));
}

template <class S>
void add_bn(ParamStore<S>& store, const std::string& prefix, long width) {
  Tensor<S> gamma(1, width), rvar(1, width);
  for (long i = 0; i < width; ++i) {
    gamma[i] = S(1);
    rvar[i] = S(1);
  }
  store.add(prefix + ".gamma", gamma);
  store.add(prefix + ".beta", Tensor<S>(1, width));
  store.add(prefix + ".rmean", Tensor<S>(1, width), /*trainable=*/false);
  store.add(prefix + ".rvar", rvar, /*trainable=*/false);
}

}  // namespace

template <class S>
std::vector<int> Model<S>::label_valences() const {
  std::vector<int> v;
  v.reserve(vocab.num_labels());
  for (int i = 0; i < vocab.num_labels(); ++i) v.push_back(vocab.label_valence(i));
  return v;
}

template <class S>
Model<S> Model<S>::initialize(chem::Vocabulary vocab, ModelConfig config, std::uint64_t seed) {
  Model<S> m;
  m.vocab = std::move(vocab);
  m.config = std::move(config);
  m.init_seed = seed;
  Rng rng(seed);
  ParamStore<S>& p = m.params;
  const int dn = m.num_labels();
  const int de = m.num_bond_types();
  const int nu = m.nu();
  const int sh = Dims::kHidden;

  p.add("enc.embed", xavier_init<S>(dn, sh, rng));
  for (int k = 1; k <= Dims::kLayers; ++k) {
    std::string lk = "enc.l" + std::to_string(k);
    if (m.config.encoder == EncoderKind::kRGIN)
      for (int l = 0; l < de; ++l) add_linear(p, rng, lk + ".edge" + std::to_string(l), sh, sh);
    add_linear(p, rng, lk + ".agg.h", sh, sh);
    add_bn(p, lk + ".agg.bn", sh);
    add_linear(p, rng, lk + ".agg.out", sh, sh);
  }
  add_linear(p, rng, "enc.mu.h", sh, sh);
  add_linear(p, rng, "enc.mu.out", sh, Dims::kLatent);
  add_linear(p, rng, "enc.logvar.h", sh, sh);
  add_linear(p, rng, "enc.logvar.out", sh, Dims::kLatent);

  add_linear(p, rng, "dec.K", Dims::kLatent + 2 * nu, Dims::kAtomExtra);
  add_linear(p, rng, "dec.F.h", Dims::kNodeRep, Dims::kNodeRep);
  add_linear(p, rng, "dec.F.out", Dims::kNodeRep, dn);
  add_bn(p, "dec.rbn", Dims::kNodeRep);

  const int pf = Dims::kPairFeat;
  add_linear(p, rng, "dec.C.h1", pf, Dims::kEdgeHidden1);
  add_linear(p, rng, "dec.C.h2", Dims::kEdgeHidden1, Dims::kEdgeHidden2);
  add_linear(p, rng, "dec.C.out", Dims::kEdgeHidden2, 1);
  add_linear(p, rng, "dec.L.h1", pf, Dims::kEdgeHidden1);
  add_linear(p, rng, "dec.L.h2", Dims::kEdgeHidden1, Dims::kEdgeHidden2);
  add_linear(p, rng, "dec.L.out", Dims::kEdgeHidden2, de);

  if (!m.config.properties.empty()) {
    add_linear(p, rng, "opt.F", Dims::kNodeRep + sh, Dims::kOptFeat);
    for (const auto& prop : m.config.properties) {
      add_linear(p, rng, "opt." + prop + ".q1", Dims::kOptFeat, Dims::kOptGate);
      add_linear(p, rng, "opt." + prop + ".q2", Dims::kOptFeat, Dims::kOptGate);
    }
  }
  return m;
}

template <class S>
Checkpoint Model<S>::to_checkpoint() const {
  Checkpoint ck;
  for (const auto& e : params.entries()) {
    CheckpointEntry entry;
    entry.dims = {static_cast<std::uint64_t>(e.value.rows()),
                  static_cast<std::uint64_t>(e.value.cols())};
    if constexpr (std::is_same_v<S, float>) {
      std::vector<float> data(e.value.data(), e.value.data() + e.value.size());
      entry.payload = std::move(data);
    } else {
      std::vector<double> data(e.value.data(), e.value.data() + e.value.size());
      entry.payload = std::move(data);
    }
    ck[e.name] = std::move(entry);
  }
  ck["meta.seed"] = {{1}, std::vector<std::uint64_t>{init_seed}};
  ck["meta.vocab_hash"] = {{1}, std::vector<std::uint64_t>{vocab.hash()}};
  ck["meta.encoder"] = {{1}, std::vector<std::uint64_t>{
                                 config.encoder == EncoderKind::kRGIN ? 1ULL : 0ULL}};
  ck["meta.histograms"] = {{1}, std::vector<std::uint64_t>{config.histograms ? 1ULL : 0ULL}};
  std::string props;
  for (const auto& p : config.properties) props += p + "\n";
  std::vector<std::uint64_t> prop_bytes(props.begin(), props.end());
  ck["meta.properties"] = {{prop_bytes.size()}, std::move(prop_bytes)};
  return ck;
}

template <class S>
Model<S> Model<S>::from_checkpoint(const Checkpoint& ck, chem::Vocabulary vocab) {
  auto meta_u64 = [&](const std::string& key) {
    auto it = ck.find(key);
    if (it == ck.end()) throw std::runtime_error("checkpoint missing " + key);
    return std::get<std::vector<std::uint64_t>>(it->second.payload);
  };
  std::uint64_t vocab_hash = meta_u64("meta.vocab_hash")[0];
  if (vocab_hash != vocab.hash())
    throw std::runtime_error("vocabulary hash mismatch: checkpoint was built for a different vocabulary");

  ModelConfig config;
  config.encoder = meta_u64("meta.encoder")[0] ? EncoderKind::kRGIN : EncoderKind::kGIN;
  config.histograms = meta_u64("meta.histograms")[0] != 0;
  {
    std::string props;
    for (auto b : meta_u64("meta.properties")) props += static_cast<char>(b);
    std::istringstream ps(props);
    std::string name;
    while (std::getline(ps, name))
      if (!name.empty()) config.properties.push_back(name);
  }

  Model<S> m = Model<S>::initialize(std::move(vocab), config, meta_u64("meta.seed")[0]);
  for (auto& e : m.params.entries()) {
    auto it = ck.find(e.name);
    if (it == ck.end()) throw std::runtime_error("checkpoint missing parameter " + e.name);
    const auto& entry = it->second;
    if (entry.dims.size() != 2 ||
        static_cast<long>(entry.dims[0]) != e.value.rows() ||
        static_cast<long>(entry.dims[1]) != e.value.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + e.name);
    std::visit(
        [&](const auto& data) {
          using T = typename std::decay_t<decltype(data)>::value_type;
          if constexpr (std::is_same_v<T, std::uint64_t>) {
            throw std::runtime_error("unexpected integer payload for " + e.name);
          } else {
            for (long i = 0; i < e.value.size(); ++i) e.value[i] = static_cast<S>(data[i]);
          }
        },
        entry.payload);
  }
  return m;
}

template <class S>
void Model<S>::save(const std::string& path) const {
  save_checkpoint(path, to_checkpoint());
}

template <class S>
Model<S> Model<S>::load(const std::string& path, chem::Vocabulary vocab) {
  return from_checkpoint(load_checkpoint(path), std::move(vocab));
}

template struct Model<float>;
template struct Model<double>;

}  // namespace molvae::model
