#pragma once

#include <map>
#include <string>
#include <vector>

#include "molvae/chem/vocabulary.hpp"
#include "molvae/core/checkpoint.hpp"
#include "molvae/core/optim.hpp"
#include "molvae/core/tensor.hpp"

namespace molvae::model {

// Architecture constants. Sizes follow the reference configuration:
// K = 5 message-passing layers, hidden and latent width 70, node
// representation width 120, edge feature width 570 with hidden sizes
// 590 and 190, sigma pre-exponential clamped to at most 2.5.
struct Dims {
  static constexpr int kLayers = 5;
  static constexpr int kHidden = 70;      // s_h
  static constexpr int kLatent = 70;      // s_lt
  static constexpr int kNodeRep = 120;    // s_n
  static constexpr int kAtomExtra = kNodeRep - kLatent;  // K-net output width
  static constexpr int kPairFeat = 3 * (kNodeRep + kHidden);  // phi width 570
  static constexpr int kEdgeHidden1 = 590;
  static constexpr int kEdgeHidden2 = 190;
  static constexpr int kOptFeat = 120;    // optimizer F output width
  static constexpr int kOptGate = 64;     // Q1/Q2 output width
  static constexpr double kSigmaClampHi = 2.5;
  static constexpr double kSigmaClampLo = -10.0;
};

enum class EncoderKind { kRGIN, kGIN };

struct ModelConfig {
  EncoderKind encoder = EncoderKind::kRGIN;
  bool histograms = true;
  std::vector<std::string> properties;
};

// Complete parameter set: encoder, decoder and optimizer heads plus batch
// norm running statistics, addressable by checkpoint key.
template <class S>
struct Model {
  chem::Vocabulary vocab;
  ModelConfig config;
  ParamStore<S> params;
  std::uint64_t init_seed = 0;

  int num_labels() const { return vocab.num_labels(); }
  int num_bond_types() const { return vocab.num_bond_types(); }
  int nu() const { return vocab.nu; }
  // Valence capacity per label index.
  std::vector<int> label_valences() const;

  static Model initialize(chem::Vocabulary vocab, ModelConfig config, std::uint64_t seed);

  void save(const std::string& path) const;
  static Model load(const std::string& path, chem::Vocabulary vocab);

  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& ck, chem::Vocabulary vocab);
};

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace molvae::model
