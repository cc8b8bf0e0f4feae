#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "molvae/chem/graph.hpp"
#include "molvae/chem/types.hpp"

namespace molvae::chem {

// Empirical distribution over training-set valence histograms, plus the
// marginal over molecule sizes. Sampling is deterministic given an Rng.
struct HistogramDistribution {
  // histogram counts -> multiplicity; every key padded to length nu
  std::map<std::vector<int>, long> entries;
  std::map<int, long> size_marginal;
  long total = 0;

  void add(const ValenceHistogram& h, int nu);
  template <class RngT>
  ValenceHistogram sample(RngT& rng) const {
    long pick = static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(total)));
    for (const auto& [counts, n] : entries) {
      pick -= n;
      if (pick < 0) return ValenceHistogram{counts};
    }
    return ValenceHistogram{entries.rbegin()->first};
  }
  template <class RngT>
  int sample_size(RngT& rng) const {
    long pick = static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(total)));
    for (const auto& [m, n] : size_marginal) {
      pick -= n;
      if (pick < 0) return m;
    }
    return size_marginal.rbegin()->first;
  }
};

// Atom/bond alphabets extracted from a training corpus, with everything the
// decoder needs to resolve label valences.
class Vocabulary {
 public:
  Representation representation = Representation::kElement;
  std::vector<AtomLabel> labels;            // sorted by text form
  std::vector<BondOrder> bond_types;        // sorted by weight
  int nu = 0;                               // max valence in the corpus
  std::map<std::string, int> rep1_valence;  // element -> most frequent valence
  HistogramDistribution histograms;

  int num_labels() const { return static_cast<int>(labels.size()); }
  int num_bond_types() const { return static_cast<int>(bond_types.size()); }

  std::optional<int> label_index(const AtomLabel& label) const;
  // Valence capacity of a label: its own for representation >= 2, the
  // element table's for representation 1. Throws if unresolvable.
  int label_valence(const AtomLabel& label) const;
  int label_valence(int index) const { return label_valence(labels[index]); }

  // Per-atom label indices for a graph; throws on out-of-vocabulary labels.
  std::vector<int> label_indices(const MolecularGraph& g) const;

  // Histogram with rep-1 labels resolved through the element table.
  ValenceHistogram molecule_histogram(const MolecularGraph& g) const;

  // FNV-1a over the serialized text form; stable across runs.
  std::uint64_t hash() const;

  void save(std::ostream& os) const;
  static Vocabulary load(std::istream& is);
};

struct CorpusStats {
  long lines = 0;
  long parsed = 0;
  long skipped = 0;
  std::vector<std::pair<long, std::string>> errors;  // (line number, message)
};

// Scans newline-delimited `SMILES[\tprop...]` text and builds the alphabets,
// the valence table and the histogram distribution. Unparseable lines are
// skipped and counted. Throws if nothing parses.
Vocabulary build_vocabulary(std::istream& corpus, Representation rep,
                            CorpusStats* stats = nullptr);

struct DatasetEntry {
  std::string smiles;  // canonical at the entry's representation
  MolecularGraph graph;
  std::vector<double> properties;
};

// Parses and canonicalizes a dataset stream; failed lines are recorded in
// stats and skipped. Lines starting with '#' are ignored.
std::vector<DatasetEntry> load_dataset(std::istream& is, Representation rep,
                                       CorpusStats* stats = nullptr);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace molvae::chem
