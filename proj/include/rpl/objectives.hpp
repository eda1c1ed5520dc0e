#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "rpl/propagation_tree.hpp"
#include "rpl/tensor.hpp"
#include "rpl/vocab.hpp"

namespace rpl {

struct LossBreakdown {
  double proto = 0.0;      // L_proto (or the manual-verbalizer loss when PV is ablated)
  double contrastive = 0.0;
  double joint = 0.0;      // L
  double augmented = 0.0;  // L_tilde
  double average = 0.0;    // L_avg = (L + L_tilde) / 2
};

// Prototypical verbalizer loss: mean over rows of
//   -log softmax_y( cos(H_i, l_y) / tau )[y_i]
// mask_states [B, d], prototypes [kNumClasses, d]. Throws Error(ZeroVector)
// when any row has zero norm.
Tensor proto_loss(const Tensor& mask_states, std::span<const Label> labels, const Tensor& prototypes, double tau);

// Supervised contrastive loss over the batch with S = cos / tau. Anchors
// without a same-label partner contribute nothing; a batch without any
// positive pair yields 0 and a warning.
Tensor contrastive_loss(const Tensor& mask_states, std::span<const Label> labels, double tau);

Tensor joint_loss(const Tensor& proto, const Tensor& contrastive, double alpha);
double joint_loss(double proto, double contrastive, double alpha);

struct Prediction {
  Label label = Label::non_rumor;
  std::array<double, kNumClasses> scores{};  // indexed by Label value
};

// argmax_y cos(h, l_y) / tau; exact ties go to non-rumor.
Prediction predict(std::span<const double> mask_state, const Tensor& prototypes, double tau);

struct LabelWordSet {
  enum class Aggregation { sum, max };
  std::array<std::vector<std::size_t>, kNumClasses> words;  // vocab ids per Label value
  Aggregation aggregation = Aggregation::sum;

  // {"rumor": [...], "non-rumor": [...]}; tokens are added to `vocab` when
  // `extend` is set, otherwise unknown tokens are an error.
  static LabelWordSet from_json(const std::string& json_text, Vocab& vocab, bool extend);
  static LabelWordSet defaults(Vocab& vocab);
  static std::array<std::vector<std::string>, kNumClasses> default_words();
  void validate() const;  // EmptyWordSet, overlap
};

// Class probabilities from masked-LM logits: g over each class's word
// probabilities, renormalised over classes.
std::array<double, kNumClasses> manual_verbalize(std::span<const double> mask_logits, const LabelWordSet& words);

// Differentiable -log P(y | mask) for the manual verbalizer with g = sum,
// averaged over the batch. logits [B, V].
Tensor manual_verbalizer_loss(const Tensor& logits, std::span<const Label> labels, const LabelWordSet& words);

}  // namespace rpl
