#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "molvae/chem/vocabulary.hpp"
#include "molvae/model/decoder.hpp"

namespace molvae::model {

struct TrainConfig {
  double lambda1 = 0.05;
  double lambda2 = 10.0;
  double learning_rate = 0.001;
  int batch_size = 100;
  int max_epochs = 300;
  long max_steps = 0;  // 0 = bounded by epochs only
  std::uint64_t seed = 0;
  int representation = 2;
  std::string encoder = "rgin";  // rgin | gin
  bool histograms = true;
  // Edge decoding consumes argmax-predicted atom types by default; this
  // switch feeds the ground-truth types instead.
  bool true_type_forcing = false;
  std::string precision = "f32";  // f32 | f64
  // Overfit harness: stop once training reconstruction reaches this value
  // (checked every eval_every steps). 0 disables.
  double stop_at_train_reconstruction = 0.0;
  long eval_every = 100;

  static TrainConfig from_file(const std::string& path);
  void apply_line(const std::string& key, const std::string& value);
  std::string to_text() const;
};

// Per-column min-max scaling of property targets to [0, 1].
struct PropertyNorms {
  std::vector<std::string> names;
  std::vector<double> min_value, max_value;

  static PropertyNorms fit(const std::vector<chem::DatasetEntry>& entries,
                           const std::vector<std::string>& names);
  double normalize(int column, double raw) const;
  void save(std::ostream& os) const;
  static PropertyNorms load(std::istream& is);
};

struct LossBreakdown {
  double atom = 0, bond = 0, bond_type = 0, kl = 0, property = 0;
  double total = 0;
  long log_clamps = 0;  // clamped log events (zero predicted probability)
};

// Assembled loss over one batch; the scalar keeps the tape alive for
// backward. Sums run per molecule and are averaged over the batch.
template <class S>
struct BatchLossResult {
  Var<S> total;
  LossBreakdown values;
};

template <class S>
BatchLossResult<S> batch_loss(ForwardContext<S>& ctx,
                              const std::vector<const chem::DatasetEntry*>& batch,
                              const Tensor<S>& eta, const PropertyNorms& norms,
                              const TrainConfig& cfg);

struct TrainResult {
  long steps = 0;
  int epochs = 0;
  double best_val_reconstruction = -1.0;
  double last_train_reconstruction = -1.0;
  LossBreakdown last_loss;
};

// Full training loop: shuffled batches, Adam updates, per-epoch validation
// reconstruction, best-validation checkpointing. metrics_csv, when given,
// receives `epoch,step,L_a,L_b,L_tb,L_lt,L_opt,total,val_reconstruction`
// rows. checkpoint_path, when given, is where the best model is written.
template <class S>
TrainResult train(Model<S>& model, const std::vector<chem::DatasetEntry>& train_set,
                  const std::vector<chem::DatasetEntry>& valid_set, const TrainConfig& cfg,
                  const PropertyNorms& norms, std::ostream* metrics_csv = nullptr,
                  const std::optional<std::string>& checkpoint_path = std::nullopt);

}  // namespace molvae::model
