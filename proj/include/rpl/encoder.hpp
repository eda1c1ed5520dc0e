#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpl/parameters.hpp"
#include "rpl/propagation_tree.hpp"
#include "rpl/tensor.hpp"
#include "rpl/vocab.hpp"

namespace rpl {

// Component switches; `true` removes the component.
struct Ablations {
  bool responses = false;      // RR: encode the claim only
  bool abs_position = false;   // APP: no depth embeddings
  bool rel_position = false;   // RPP: no relation-aware attention term
  bool augmentation = false;   // ViRA: single forward per step
  bool proto_verbalizer = false;  // PV: manual label-word verbalizer instead
};

struct EncoderConfig {
  std::size_t d = 32;
  std::size_t heads = 4;
  std::size_t layers = 4;      // total L
  std::size_t syn_layers = 2;  // frozen lower k, 1 <= k < L
  std::size_t max_len = 128;   // o: event-side token budget
  std::size_t depth_clamp = 16;
  std::size_t ffn_mult = 4;
  double init_std = 0.02;
  // Scale of the frozen position table relative to the unit-variance token
  // table; small values keep token identity dominant in the frozen features.
  double syn_position_std = 0.1;
  double ln_eps = 1e-5;
  std::string template_text = "For this [MASK] story .";

  void validate() const;  // throws Error(BadConfig)
};

// Cloze prompt with exactly one [MASK].
class Template {
 public:
  Template(const Vocab& vocab, const std::string& text);

  const std::vector<std::size_t>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t mask_index() const { return mask_index_; }

 private:
  std::vector<std::size_t> ids_;
  std::size_t mask_index_ = 0;
};

// Token sequence for the event side: claim [SEP] post [SEP] post [SEP] ...
// under the budget `max_len`. The claim is never cut; the last post that
// does not fit is cut at token level and the rest dropped.
struct EventSequence {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> token_node;      // tree node per token (0 = claim)
  std::vector<std::uint8_t> separator;      // 1 on [SEP]
  RankedThread ranked;                      // included posts only
};

EventSequence build_event_sequence(const Vocab& vocab, const Event& event, const PropagationTree& tree,
                                   RankStrategy strategy, std::size_t max_len, bool with_responses = true);

// Everything the SemEncoder needs for one event, with the frozen
// SynEncoder outputs already computed.
struct EncodedPair {
  Tensor template_states;  // X_p [|p|, d]
  Tensor event_states;     // X_cr [n, d]
  EventSequence sequence;
  std::vector<std::size_t> token_depth;  // per event token, clamped
  // Relation index for every ordered pair over [template ; event] tokens,
  // row-major, template rows/columns NONE.
  std::vector<std::size_t> relations;
  std::size_t mask_index = 0;

  std::size_t template_length() const { return template_states.rows(); }
  std::size_t event_length() const { return event_states.rows(); }
  std::size_t total_length() const { return template_length() + event_length(); }
  // 1 on responsive-post tokens, 0 on template, claim and separators.
  std::vector<std::uint8_t> perturb_mask() const;
};

struct SemOutput {
  Tensor hidden;      // H [|p|+n, d]
  Tensor mask_state;  // H^m [1, d]
};

// Post-LN transformer layer: h = LN(x + MHA(x)), y = LN(h + FFN(h)). When
// `relations` is given, attention logits get q_i . a_{rel(i,j)} added
// (key-side relative bias, one d/heads slice of `relation_table` per head).
class TransformerLayer {
 public:
  TransformerLayer(ParameterStore& store, const std::string& prefix, const EncoderConfig& config,
                   std::mt19937_64& rng, bool frozen);

  Tensor forward(const Tensor& x, const Tensor* relation_table = nullptr,
                 const std::vector<std::size_t>* relations = nullptr) const;

 private:
  std::size_t d_, heads_;
  double eps_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  Tensor ln1_g_, ln1_b_;
  Tensor w1_, b1_, w2_, b2_;
  Tensor ln2_g_, ln2_b_;
};

// The full hierarchical prompt encoder plus the prototype vectors.
class Model {
 public:
  Model(EncoderConfig config, Vocab vocab, std::uint64_t seed);
  // Members alias the parameter store's tensors; copying would share them.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const EncoderConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const Template& prompt() const { return template_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Frozen lower layers over a token sequence (positions start at 0).
  Tensor syn_encode(const std::vector<std::size_t>& ids) const;
  Tensor syn_encode_template() const;

  // Ranks, truncates, tokenizes and runs the SynEncoder on both segments.
  // Throws Error(ClaimTooLong) when the claim and its separator exceed o.
  EncodedPair encode(const Event& event, RankStrategy strategy, const Ablations& ablations = {}) const;

  // Tunable layer norm over [X_p ; X_cr]; the ViRA perturbation is applied
  // to this output.
  Tensor normalize(const EncodedPair& pair) const;

  SemOutput sem_encode(const Tensor& normalized, const EncodedPair& pair, const Ablations& ablations = {}) const;

  Tensor prototypes() const { return prototypes_; }
  Tensor relation_table() const { return relation_table_; }
  Tensor abs_position_table() const { return abs_position_; }

  // Logits over the vocabulary from a [1, d] mask state through the frozen
  // token embedding (tied masked-LM head).
  Tensor mlm_logits(const Tensor& mask_state) const;

 private:
  EncoderConfig config_;
  Vocab vocab_;
  Template template_;
  ParameterStore params_;
  Tensor tok_emb_, pos_emb_, emb_ln_g_, emb_ln_b_;
  std::vector<TransformerLayer> syn_layers_;
  Tensor norm_g_, norm_b_;
  Tensor abs_position_, relation_table_;
  std::vector<TransformerLayer> sem_layers_;
  Tensor prototypes_;
};

}  // namespace rpl
