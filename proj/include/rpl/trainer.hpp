#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rpl/config.hpp"
#include "rpl/detector.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/objectives.hpp"
#include "rpl/optimizer.hpp"

namespace rpl {

// Fast-gradient-value perturbation of layer-normalised embeddings [n, d]:
// token rows with mask=1 and a nonzero gradient move by eps * g / ||g||_2;
// every other row is returned unchanged.
Tensor vira_perturb(const Tensor& embeddings, std::span<const double> grad, std::span<const std::uint8_t> mask,
                    double eps);
// The additive offset alone (zeros where nothing moves).
std::vector<double> vira_offset(std::span<const double> grad, std::span<const std::uint8_t> mask, std::size_t d,
                                double eps);

// Stops once `patience` consecutive epochs fail to beat the best metric. An
// equal metric with a strictly lower loss also counts as an improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `metric` (then `loss`) is a new best.
  bool update(std::size_t epoch, double metric, double loss = 0.0);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -1.0;
  double best_loss_ = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown mean_loss;
  MetricReport heldout;
  double heldout_loss = 0.0;  // classification loss on the held-out split
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::size_t stopping_epoch = 0;
  std::size_t steps = 0;
  std::size_t forward_passes = 0;
};

// Owns the optimizer state for one detector and runs training steps. One
// step: forward -> L; if augmentation is on, backward for embedding
// gradients, perturb response tokens, second forward -> L_tilde; then
// backward of L_avg = (L + L_tilde) / 2 and one AdamW update of the
// non-frozen parameters. Parameter gradients of the first backward are
// discarded.
class Trainer {
 public:
  Trainer(Detector& detector);

  LossBreakdown train_step(std::span<const EncodedPair* const> batch, std::span<const Label> labels,
                           std::size_t batch_id = 0);
  LossBreakdown train_step(const std::vector<Event>& batch, std::size_t batch_id = 0);

  // Loss of a batch without any update; `perturbation_eps` > 0 applies the
  // augmentation first (used to compare L and L_tilde).
  std::pair<double, double> probe_losses(std::span<const EncodedPair* const> batch, std::span<const Label> labels,
                                         double perturbation_eps);

  std::size_t forward_passes() const { return forward_passes_; }
  std::size_t steps() const { return optimizer_.steps(); }

 private:
  struct Forward {
    std::vector<Tensor> normalized;
    Tensor loss, proto, contrastive;
  };
  Forward forward(std::span<const EncodedPair* const> batch, std::span<const Label> labels,
                  const std::vector<Tensor>* normalized);

  Detector& detector_;
  AdamW optimizer_;
  std::size_t forward_passes_ = 0;
};

// Mean classification loss (prototypical, or label-word under the PV
// ablation) over encoded events; no graph is built.
double classification_loss(const Detector& detector, const std::vector<EncodedPair>& pairs,
                           std::span<const Label> labels);

struct TrainResult {
  Detector detector;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full training run over labelled source events: seeded split of a held-out
// set (10% of the source by default, or of `target` with dev_from_target),
// shuffled mini-batches, held-out macro-F1 after every epoch, early stopping
// and restoration of the best epoch's parameters.
// Throws Error(EmptyDataset) / Error(SingleClassDataset).
TrainResult train(const std::vector<Event>& source, const RunConfig& config,
                  const std::vector<Event>* target = nullptr, const EpochCallback& on_epoch = {});

}  // namespace rpl
