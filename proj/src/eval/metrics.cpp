#include "molvae/eval/metrics.hpp"

#include <cmath>
#include <istream>
#include <sstream>

#include "molvae/chem/smiles.hpp"
#include "molvae/model/decoder.hpp"

namespace molvae::eval {

using chem::MolecularGraph;
using model::DecodeMode;

TrainingIndex TrainingIndex::build(const std::vector<chem::DatasetEntry>& entries,
                                   const MetricConfig& cfg) {
  TrainingIndex index;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    index.canonical.insert(entries[i].smiles);
    Rng rng = Rng::derive(cfg.seed ^ 0x7261696eULL, i);
    auto keys = chem::sample_substructures(entries[i].graph, cfg.diversity_walks,
                                           cfg.diversity_length, rng);
    index.substructures.insert(keys.begin(), keys.end());
  }
  return index;
}

std::string MetricReport::table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "metric            value\n";
  if (reconstruction >= 0) os << "reconstruction    " << reconstruction << "%\n";
  os << "validity          " << validity << "%\n";
  os << "validity(valence) " << validity_valence_only << "%\n";
  os << "novelty           " << novelty << "%\n";
  os << "uniqueness        " << uniqueness << "%\n";
  os << "diversity         " << diversity << "%\n";
  os << "samples           " << samples << "\n";
  os << "valid             " << valid_count << "\n";
  os << "unique            " << unique_count << "\n";
  os << "novel             " << novel_count << "\n";
  return os.str();
}

std::string MetricReport::csv() const {
  std::ostringstream os;
  os << "reconstruction,validity,validity_valence_only,novelty,uniqueness,diversity,"
        "samples,valid,unique,novel,substructures_sampled,substructures_novel,seed,decodes\n";
  os << reconstruction << ',' << validity << ',' << validity_valence_only << ',' << novelty
     << ',' << uniqueness << ',' << diversity << ',' << samples << ',' << valid_count << ','
     << unique_count << ',' << novel_count << ',' << substructures_sampled << ','
     << substructures_novel << ',' << seed << ',' << decodes_per_molecule << "\n";
  return os.str();
}

template <class S>
double reconstruction_rate(model::Model<S>& model,
                           const std::vector<chem::DatasetEntry>& entries, int n_dec,
                           std::uint64_t seed) {
  if (entries.empty()) return 0.0;
  long hits = 0, trials = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries[i];
    // encode once in eval mode
    Tape<S> tape;
    model::ForwardContext<S> ctx(tape, model, /*training=*/false, /*with_grad=*/false);
    auto bg = model::make_batch({&entry.graph}, model.vocab);
    auto enc = model::encode(ctx, bg);
    auto alpha0 = model.vocab.molecule_histogram(entry.graph);

    for (int d = 0; d < n_dec; ++d) {
      Rng rng = Rng::derive(seed, i * 1000003ULL + d);
      Tensor<S> eta = model::normal_noise<S>(bg.num_nodes, model::Dims::kLatent, rng);
      Tensor<S> z(bg.num_nodes, model::Dims::kLatent);
      for (long r = 0; r < z.rows(); ++r)
        for (long c = 0; c < z.cols(); ++c)
          z.at(r, c) = enc.mu.val().at(r, c) +
                       std::exp(enc.logvar.val().at(r, c) / S(2)) * eta.at(r, c);
      ++trials;
      try {
        auto decoded =
            model::decode_molecule(model, z, alpha0, DecodeMode::kArgmax, DecodeMode::kArgmax,
                                   nullptr);
        if (chem::write_canonical_smiles(decoded.graph) == entry.smiles) ++hits;
      } catch (const std::exception&) {
        // a failed decode counts as a miss
      }
    }
  }
  return trials == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(trials);
}

template <class S>
MetricReport eval_reconstruction(model::Model<S>& model,
                                 const std::vector<chem::DatasetEntry>& entries, long n_mol,
                                 int n_dec, std::uint64_t seed) {
  MetricReport report;
  report.seed = seed;
  report.decodes_per_molecule = n_dec;
  std::vector<chem::DatasetEntry> subset;
  long n = std::min<long>(n_mol, static_cast<long>(entries.size()));
  subset.assign(entries.begin(), entries.begin() + n);
  report.samples = n;
  report.reconstruction = reconstruction_rate(model, subset, n_dec, seed);
  return report;
}

namespace {

struct Tally {
  long samples = 0;
  long valid = 0;
  long valence_ok = 0;
  long novel = 0;
  std::set<std::string> unique;
  long substructs = 0;
  long substructs_novel = 0;

  void observe(const MolecularGraph& g, const TrainingIndex& index, const MetricConfig& cfg,
               std::uint64_t stream, std::vector<std::string>* out_smiles) {
    ++samples;
    const MolecularGraph* scored = &g;
    MolecularGraph largest;
    bool valence_fine = g.valence_consistent() && g.num_atoms() > 0;
    if (valence_fine) ++valence_ok;
    bool connected = chem::is_connected(g) && g.num_atoms() > 0;
    if (cfg.largest_component && !connected && g.num_atoms() > 0) {
      largest = chem::largest_component(g);
      scored = &largest;
      connected = true;
    }
    if (!(valence_fine && connected)) {
      if (out_smiles) out_smiles->push_back("");
      return;
    }
    ++valid;
    std::string canon = chem::write_canonical_smiles(*scored);
    if (out_smiles) out_smiles->push_back(canon);
    unique.insert(canon);
    if (!index.canonical.count(canon)) ++novel;
    Rng rng = Rng::derive(cfg.seed ^ 0x67656e65ULL, stream);
    for (const auto& key :
         chem::sample_substructures(*scored, cfg.diversity_walks, cfg.diversity_length, rng)) {
      ++substructs;
      if (!index.substructures.count(key)) ++substructs_novel;
    }
  }

  MetricReport report(const MetricConfig& cfg) const {
    MetricReport r;
    r.seed = cfg.seed;
    r.samples = samples;
    r.valid_count = valid;
    r.unique_count = static_cast<long>(unique.size());
    r.novel_count = novel;
    r.substructures_sampled = substructs;
    r.substructures_novel = substructs_novel;
    r.validity = samples ? 100.0 * valid / samples : 0.0;
    r.validity_valence_only = samples ? 100.0 * valence_ok / samples : 0.0;
    r.novelty = valid ? 100.0 * novel / valid : 0.0;
    r.uniqueness = valid ? 100.0 * static_cast<double>(unique.size()) / valid : 0.0;
    r.diversity = substructs ? 100.0 * substructs_novel / substructs : 0.0;
    return r;
  }
};

}  // namespace

template <class S>
std::pair<std::vector<std::string>, MetricReport> eval_generation(
    model::Model<S>& model, const TrainingIndex& index, long n, const MetricConfig& cfg) {
  Tally tally;
  std::vector<std::string> all;
  std::vector<std::string> molecules;
  for (long i = 0; i < n; ++i) {
    Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(i));
    chem::ValenceHistogram alpha0;
    int m;
    if (model.config.histograms) {
      alpha0 = model.vocab.histograms.sample(rng);
      m = alpha0.total();
    } else {
      m = model.vocab.histograms.sample_size(rng);
      alpha0.counts.assign(model.nu(), 0);
    }
    Tensor<S> z = model::normal_noise<S>(m, model::Dims::kLatent, rng);
    try {
      auto decoded = model::decode_molecule(model, z, alpha0, DecodeMode::kSample,
                                            DecodeMode::kSample, &rng);
      tally.observe(decoded.graph, index, cfg, static_cast<std::uint64_t>(i), &all);
    } catch (const std::exception&) {
      ++tally.samples;
      all.push_back("");
    }
  }
  for (const auto& s : all)
    if (!s.empty()) molecules.push_back(s);
  return {std::move(molecules), tally.report(cfg)};
}

MetricReport eval_files(std::istream& generated, std::istream& training,
                        chem::Representation rep, const MetricConfig& cfg) {
  TrainingIndex index;
  std::string line;
  long t = 0;
  while (std::getline(training, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string smiles;
    ls >> smiles;
    try {
      auto g = chem::parse_smiles(smiles, rep);
      index.canonical.insert(chem::write_canonical_smiles(g));
      Rng rng = Rng::derive(cfg.seed ^ 0x7261696eULL, t);
      auto keys =
          chem::sample_substructures(g, cfg.diversity_walks, cfg.diversity_length, rng);
      index.substructures.insert(keys.begin(), keys.end());
    } catch (const std::exception&) {
      // unreadable training lines are skipped
    }
    ++t;
  }

  Tally tally;
  long i = 0;
  while (std::getline(generated, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string smiles;
    ls >> smiles;
    try {
      auto g = chem::parse_smiles(smiles, rep);
      tally.observe(g, index, cfg, static_cast<std::uint64_t>(i), nullptr);
    } catch (const std::exception&) {
      ++tally.samples;  // unreadable generated lines count as invalid
    }
    ++i;
  }
  return tally.report(cfg);
}

template double reconstruction_rate(model::Model<float>&,
                                    const std::vector<chem::DatasetEntry>&, int,
                                    std::uint64_t);
template double reconstruction_rate(model::Model<double>&,
                                    const std::vector<chem::DatasetEntry>&, int,
                                    std::uint64_t);
template MetricReport eval_reconstruction(model::Model<float>&,
                                          const std::vector<chem::DatasetEntry>&, long, int,
                                          std::uint64_t);
template MetricReport eval_reconstruction(model::Model<double>&,
                                          const std::vector<chem::DatasetEntry>&, long, int,
                                          std::uint64_t);
template std::pair<std::vector<std::string>, MetricReport> eval_generation(
    model::Model<float>&, const TrainingIndex&, long, const MetricConfig&);
template std::pair<std::vector<std::string>, MetricReport> eval_generation(
    model::Model<double>&, const TrainingIndex&, long, const MetricConfig&);

}  // namespace molvae::eval
