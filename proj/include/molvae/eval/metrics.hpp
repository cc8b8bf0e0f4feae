#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "molvae/chem/substructure.hpp"
#include "molvae/chem/vocabulary.hpp"
#include "molvae/model/params.hpp"

namespace molvae::eval {

struct MetricConfig {
  int diversity_walks = 10;   // R walks per molecule
  int diversity_length = 5;   // walk length L
  std::uint64_t seed = 0;
  bool largest_component = false;  // validity on the largest component only
};

// Canonical-SMILES set and substructure pool of the training split.
struct TrainingIndex {
  std::set<std::string> canonical;
  std::set<chem::SubstructureKey> substructures;

  static TrainingIndex build(const std::vector<chem::DatasetEntry>& entries,
                             const MetricConfig& cfg);
};

struct MetricReport {
  double reconstruction = -1;  // percent; -1 when not evaluated
  double validity = 0;
  double validity_valence_only = 0;  // ignores connectivity
  double novelty = 0;
  double uniqueness = 0;
  double diversity = 0;
  long samples = 0;
  long valid_count = 0;
  long unique_count = 0;
  long novel_count = 0;
  long substructures_sampled = 0;
  long substructures_novel = 0;
  std::uint64_t seed = 0;
  int decodes_per_molecule = 0;

  std::string table() const;
  std::string csv() const;
};

// Fraction (in percent) of decodes whose canonical SMILES reproduces the
// input, over n_dec latent draws per molecule with argmax decoding.
template <class S>
double reconstruction_rate(model::Model<S>& model,
                           const std::vector<chem::DatasetEntry>& entries, int n_dec,
                           std::uint64_t seed);

// The full reconstruction protocol: caps n_mol at the set size with a
// warning counter in the report.
template <class S>
MetricReport eval_reconstruction(model::Model<S>& model,
                                 const std::vector<chem::DatasetEntry>& entries, long n_mol,
                                 int n_dec, std::uint64_t seed);

// Generation protocol: per sample draw the histogram (and with it the size)
// from the training distribution, sample Z from the standard normal, decode
// once in sample mode. Returns the generated canonical SMILES alongside the
// metric report.
template <class S>
std::pair<std::vector<std::string>, MetricReport> eval_generation(
    model::Model<S>& model, const TrainingIndex& index, long n, const MetricConfig& cfg);

// File-level evaluation: same definitions applied to already-written
// SMILES; unreadable lines count as invalid. Reconstruction is omitted.
MetricReport eval_files(std::istream& generated, std::istream& training,
                        chem::Representation rep, const MetricConfig& cfg);

}  // namespace molvae::eval
