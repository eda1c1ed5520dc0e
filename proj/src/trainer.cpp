#include "rpl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rpl/error.hpp"
#include "rpl/log.hpp"

namespace rpl {

std::vector<double> vira_offset(std::span<const double> grad, std::span<const std::uint8_t> mask, std::size_t d,
                                double eps) {
  if (d == 0 || grad.size() != mask.size() * d) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(grad.size()) + " vs " + std::to_string(mask.size()) + "x" +
                                              std::to_string(d),
                "vira gradient/mask");
  }
  std::vector<double> offset(grad.size(), 0.0);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    double norm = 0.0;
    for (std::size_t c = 0; c < d; ++c) norm += grad[t * d + c] * grad[t * d + c];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t c = 0; c < d; ++c) offset[t * d + c] = eps * grad[t * d + c] / norm;
  }
  return offset;
}

Tensor vira_perturb(const Tensor& embeddings, std::span<const double> grad, std::span<const std::uint8_t> mask,
                    double eps) {
  if (embeddings.rank() != 2 || embeddings.rows() != mask.size()) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(embeddings.shape()) + " vs mask " + std::to_string(mask.size()),
                "vira_perturb");
  }
  const std::size_t d = embeddings.cols();
  const auto offset = vira_offset(grad, mask, d, eps);
  std::vector<double> out(embeddings.data().begin(), embeddings.data().end());
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;  // bit-identical outside the mask
    for (std::size_t c = 0; c < d; ++c) out[t * d + c] += offset[t * d + c];
  }
  return Tensor::from(embeddings.shape(), std::move(out));
}

bool EarlyStopping::update(std::size_t epoch, double metric, double loss) {
  if (epoch == 1 || metric > best_ || (metric == best_ && loss < best_loss_)) {
    best_ = metric;
    best_loss_ = loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(Detector& detector)
    : detector_(detector),
      optimizer_(AdamWConfig{.lr = detector.config.train.lr, .weight_decay = detector.config.train.weight_decay}) {}

Trainer::Forward Trainer::forward(std::span<const EncodedPair* const> batch, std::span<const Label> labels,
                                  const std::vector<Tensor>* normalized) {
  const TrainConfig& cfg = detector_.config.train;
  const Model& model = detector_.model;
  Forward f;
  std::vector<Tensor> states;
  states.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor e = normalized ? (*normalized)[i] : model.normalize(*batch[i]);
    states.push_back(model.sem_encode(e, *batch[i], cfg.ablations).mask_state);
    f.normalized.push_back(std::move(e));
  }
  Tensor m = concat(states, 0);
  f.proto = cfg.ablations.proto_verbalizer ? manual_verbalizer_loss(model.mlm_logits(m), labels, detector_.label_words)
                                           : proto_loss(m, labels, model.prototypes(), cfg.tau);
  f.contrastive = batch.size() >= 2 ? contrastive_loss(m, labels, cfg.tau) : Tensor::scalar(0.0);
  f.loss = joint_loss(f.proto, f.contrastive, cfg.alpha);
  ++forward_passes_;
  return f;
}

LossBreakdown Trainer::train_step(std::span<const EncodedPair* const> batch, std::span<const Label> labels,
                                  std::size_t batch_id) {
  if (batch.empty() || batch.size() != labels.size()) {
    throw Error(ErrorCode::EmptyDataset, "batch " + std::to_string(batch_id));
  }
  const TrainConfig& cfg = detector_.config.train;
  PrecisionScope scope(cfg.precision);
  ParameterStore& params = detector_.model.params();

  Forward first = forward(batch, labels, nullptr);
  LossBreakdown out;
  out.proto = first.proto.item();
  out.contrastive = first.contrastive.item();
  out.joint = first.loss.item();

  Tensor average = first.loss;
  out.augmented = out.joint;
  if (!cfg.ablations.augmentation) {
    first.loss.backward();
    std::vector<Tensor> perturbed;
    perturbed.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Tensor& e = first.normalized[i];
      const auto mask = batch[i]->perturb_mask();
      auto offset = vira_offset(e.grad(), mask, e.cols(), cfg.vira_eps);
      perturbed.push_back(add(e, Tensor::from(e.shape(), std::move(offset))));
    }
    Forward second = forward(batch, labels, &perturbed);
    out.augmented = second.loss.item();
    average = scale(add(first.loss, second.loss), 0.5);
  }
  out.average = average.item();
  if (!std::isfinite(out.joint) || !std::isfinite(out.augmented) || !std::isfinite(out.average)) {
    throw Error(ErrorCode::NonFiniteLoss, "batch " + std::to_string(batch_id));
  }

  params.zero_grad();
  average.backward();
  optimizer_.step(params);
  params.zero_grad();
  return out;
}

LossBreakdown Trainer::train_step(const std::vector<Event>& batch, std::size_t batch_id) {
  std::vector<EncodedPair> pairs;
  std::vector<Label> labels;
  for (const Event& e : batch) {
    if (!e.label) throw Error(ErrorCode::ParseError, e.id, "training event has no label");
    pairs.push_back(detector_.encode(e));
    labels.push_back(*e.label);
  }
  std::vector<const EncodedPair*> ptrs;
  for (const EncodedPair& p : pairs) ptrs.push_back(&p);
  return train_step(ptrs, labels, batch_id);
}

std::pair<double, double> Trainer::probe_losses(std::span<const EncodedPair* const> batch,
                                                std::span<const Label> labels, double perturbation_eps) {
  PrecisionScope scope(detector_.config.train.precision);
  ParameterStore& params = detector_.model.params();
  const std::size_t saved_passes = forward_passes_;
  Forward first = forward(batch, labels, nullptr);
  first.loss.backward();
  std::vector<Tensor> perturbed;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& e = first.normalized[i];
    perturbed.push_back(vira_perturb(e, e.grad(), batch[i]->perturb_mask(), perturbation_eps));
  }
  const double augmented = [&] {
    NoGradScope no_grad;
    return forward(batch, labels, &perturbed).loss.item();
  }();
  params.zero_grad();
  forward_passes_ = saved_passes;
  return {first.loss.item(), augmented};
}

double classification_loss(const Detector& detector, const std::vector<EncodedPair>& pairs,
                           std::span<const Label> labels) {
  if (pairs.empty()) return 0.0;
  NoGradScope no_grad;
  std::vector<Tensor> states;
  states.reserve(pairs.size());
  for (const EncodedPair& p : pairs) states.push_back(detector.mask_state(p));
  const Tensor m = concat(states, 0);
  const TrainConfig& cfg = detector.config.train;
  return (cfg.ablations.proto_verbalizer
              ? manual_verbalizer_loss(detector.model.mlm_logits(m), labels, detector.label_words)
              : proto_loss(m, labels, detector.model.prototypes(), cfg.tau))
      .item();
}

// ---------------------------------------------------------------------------

namespace {

struct Split {
  std::vector<std::size_t> train, heldout;
};

// Stratified seeded split; each class keeps at least one training item and
// contributes at least one held-out item when it has two or more.
Split stratified_split(const std::vector<Event>& events, double fraction, std::mt19937_64& rng) {
  Split split;
  for (Label y : {Label::non_rumor, Label::rumor}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < events.size(); ++i)
      if (events[i].label == y) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) held = std::clamp<std::size_t>(held, 1, idx.size() - 1);
    else held = 0;
    split.heldout.insert(split.heldout.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  return split;
}

void require_labelled(const std::vector<Event>& events, const char* what) {
  if (events.empty()) throw Error(ErrorCode::EmptyDataset, what);
  bool seen[kNumClasses] = {false, false};
  for (const Event& e : events) {
    if (!e.label) throw Error(ErrorCode::ParseError, e.id, std::string(what) + " event has no label");
    seen[static_cast<std::size_t>(*e.label)] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorCode::SingleClassDataset, what);
}

}  // namespace

TrainResult train(const std::vector<Event>& source, const RunConfig& config, const std::vector<Event>* target,
                  const EpochCallback& on_epoch) {
  config.encoder.validate();
  config.train.validate();
  require_labelled(source, "source");
  const TrainConfig& cfg = config.train;
  PrecisionScope scope(cfg.precision);

  Detector detector = Detector::create(config, source);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<const Event*> train_events, dev_events;
  if (cfg.dev_from_target) {
    if (!target) throw Error(ErrorCode::BadConfig, "dev_from_target", "needs target events");
    require_labelled(*target, "target");
    Split split = stratified_split(*target, cfg.heldout_fraction, rng);
    for (const Event& e : source) train_events.push_back(&e);
    for (std::size_t i : split.heldout) dev_events.push_back(&(*target)[i]);
  } else {
    Split split = stratified_split(source, cfg.heldout_fraction, rng);
    for (std::size_t i : split.train) train_events.push_back(&source[i]);
    for (std::size_t i : split.heldout) dev_events.push_back(&source[i]);
  }

  // SynEncoder outputs never change, so every event is encoded once.
  std::vector<EncodedPair> train_pairs, dev_pairs;
  std::vector<Label> train_labels, dev_labels;
  for (const Event* e : train_events) {
    train_pairs.push_back(detector.encode(*e));
    train_labels.push_back(*e->label);
  }
  for (const Event* e : dev_events) {
    dev_pairs.push_back(detector.encode(*e));
    dev_labels.push_back(*e->label);
  }

  Trainer trainer(detector);
  EarlyStopping stopper(cfg.patience);
  TrainHistory history;
  auto best = detector.model.params().snapshot();

  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord record;
    record.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (order.size() - end == 1) end = order.size();  // no singleton tail batch
      std::vector<const EncodedPair*> batch;
      std::vector<Label> labels;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train_pairs[order[k]]);
        labels.push_back(train_labels[order[k]]);
      }
      const LossBreakdown loss = trainer.train_step(batch, labels, history.steps);
      record.mean_loss.proto += loss.proto;
      record.mean_loss.contrastive += loss.contrastive;
      record.mean_loss.joint += loss.joint;
      record.mean_loss.augmented += loss.augmented;
      record.mean_loss.average += loss.average;
      ++batches;
      ++history.steps;
      start = end;
    }
    if (batches) {
      const double nb = static_cast<double>(batches);
      record.mean_loss.proto /= nb;
      record.mean_loss.contrastive /= nb;
      record.mean_loss.joint /= nb;
      record.mean_loss.augmented /= nb;
      record.mean_loss.average /= nb;
    }
    if (!dev_pairs.empty()) {
      record.heldout = evaluate_encoded(detector, dev_pairs, dev_labels);
      record.heldout_loss = classification_loss(detector, dev_pairs, dev_labels);
    }
    history.epochs.push_back(record);
    history.stopping_epoch = epoch;
    if (on_epoch) on_epoch(record);
    if (stopper.update(epoch, record.heldout.macro_f1, record.heldout_loss)) best = detector.model.params().snapshot();
    if (stopper.should_stop()) break;
  }
  history.best_epoch = stopper.best_epoch();
  history.forward_passes = trainer.forward_passes();
  detector.model.params().restore(best);
  return {std::move(detector), std::move(history)};
}

}  // namespace rpl
