#include "rpl/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "rpl/error.hpp"

namespace rpl {

void EncoderConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw Error(ErrorCode::BadConfig, key, why); };
  if (d == 0 || heads == 0 || d % heads != 0) fail("d", "d must be a positive multiple of heads");
  if (syn_layers < 1 || syn_layers >= layers) fail("syn_layers", "need 1 <= syn_layers < layers");
  if (max_len < 2) fail("max_len", "max_len must be at least 2");
  if (ffn_mult == 0) fail("ffn_mult", "must be positive");
  if (!(init_std > 0.0)) fail("init_std", "must be positive");
  if (syn_position_std < 0.0) fail("syn_position_std", "must be non-negative");
}

Template::Template(const Vocab& vocab, const std::string& text) : ids_(vocab.encode(text)) {
  const auto masks = std::count(ids_.begin(), ids_.end(), Vocab::kMask);
  if (masks != 1) {
    throw Error(ErrorCode::BadTemplate, text, "template needs exactly one [MASK], found " + std::to_string(masks));
  }
  mask_index_ = static_cast<std::size_t>(std::find(ids_.begin(), ids_.end(), Vocab::kMask) - ids_.begin());
}

EventSequence build_event_sequence(const Vocab& vocab, const Event& event, const PropagationTree& tree,
                                   RankStrategy strategy, std::size_t max_len, bool with_responses) {
  EventSequence seq;
  seq.ranked.strategy = strategy;
  auto claim = vocab.encode(event.claim.text);
  if (claim.size() + 1 > max_len) {
    throw Error(ErrorCode::ClaimTooLong, event.claim.id,
                std::to_string(claim.size()) + " claim tokens + [SEP] exceed budget " + std::to_string(max_len));
  }
  auto push = [&seq](std::size_t token, std::size_t node, bool sep) {
    seq.tokens.push_back(token);
    seq.token_node.push_back(node);
    seq.separator.push_back(sep ? 1 : 0);
  };
  for (std::size_t t : claim) push(t, PropagationTree::kClaim, false);
  push(Vocab::kSep, PropagationTree::kClaim, true);
  if (!with_responses) return seq;

  for (std::size_t node : rank_nodes(tree, strategy)) {
    const std::size_t remaining = max_len - seq.tokens.size();
    auto tokens = vocab.encode(event.posts[node - 1].text);
    if (tokens.size() + 1 <= remaining) {
      for (std::size_t t : tokens) push(t, node, false);
      push(Vocab::kSep, node, true);
      seq.ranked.order.push_back(tree.id(node));
      continue;
    }
    const std::size_t keep = std::min(tokens.size(), remaining);
    for (std::size_t k = 0; k < keep; ++k) push(tokens[k], node, false);
    if (keep > 0) seq.ranked.order.push_back(tree.id(node));
    seq.ranked.truncated_at = TruncationPoint{tree.id(node), keep};
    break;
  }
  return seq;
}

std::vector<std::uint8_t> EncodedPair::perturb_mask() const {
  std::vector<std::uint8_t> mask(total_length(), 0);
  const std::size_t offset = template_length();
  for (std::size_t i = 0; i < sequence.tokens.size(); ++i) {
    mask[offset + i] = (sequence.token_node[i] != PropagationTree::kClaim && !sequence.separator[i]) ? 1 : 0;
  }
  return mask;
}

// ---------------------------------------------------------------------------

TransformerLayer::TransformerLayer(ParameterStore& store, const std::string& prefix, const EncoderConfig& config,
                                   std::mt19937_64& rng, bool frozen)
    : d_(config.d), heads_(config.heads), eps_(config.ln_eps) {
  const std::size_t d = config.d;
  const std::size_t f = config.d * config.ffn_mult;
  const double wstd = 1.0 / std::sqrt(static_cast<double>(d));
  const double fstd = 1.0 / std::sqrt(static_cast<double>(f));
  wq_ = store.add_normal(prefix + ".wq", {d, d}, wstd, rng, frozen);
  bq_ = store.add_constant(prefix + ".bq", {d}, 0.0, frozen);
  wk_ = store.add_normal(prefix + ".wk", {d, d}, wstd, rng, frozen);
  bk_ = store.add_constant(prefix + ".bk", {d}, 0.0, frozen);
  wv_ = store.add_normal(prefix + ".wv", {d, d}, wstd, rng, frozen);
  bv_ = store.add_constant(prefix + ".bv", {d}, 0.0, frozen);
  wo_ = store.add_normal(prefix + ".wo", {d, d}, wstd, rng, frozen);
  bo_ = store.add_constant(prefix + ".bo", {d}, 0.0, frozen);
  ln1_g_ = store.add_constant(prefix + ".ln1.g", {d}, 1.0, frozen);
  ln1_b_ = store.add_constant(prefix + ".ln1.b", {d}, 0.0, frozen);
  w1_ = store.add_normal(prefix + ".w1", {d, f}, wstd, rng, frozen);
  b1_ = store.add_constant(prefix + ".b1", {f}, 0.0, frozen);
  w2_ = store.add_normal(prefix + ".w2", {f, d}, fstd, rng, frozen);
  b2_ = store.add_constant(prefix + ".b2", {d}, 0.0, frozen);
  ln2_g_ = store.add_constant(prefix + ".ln2.g", {d}, 1.0, frozen);
  ln2_b_ = store.add_constant(prefix + ".ln2.b", {d}, 0.0, frozen);
}

Tensor TransformerLayer::forward(const Tensor& x, const Tensor* relation_table,
                                 const std::vector<std::size_t>* relations) const {
  if (x.rank() != 2 || x.cols() != d_) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(x.shape()) + " vs [n," + std::to_string(d_) + "]",
                "transformer layer input");
  }
  const std::size_t n = x.rows();
  const std::size_t dh = d_ / heads_;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool relative = relation_table != nullptr && relations != nullptr;
  if (relative && relations->size() != n * n) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(relations->size()) + " vs " + std::to_string(n * n),
                "relation index");
  }

  Tensor q = add(matmul(x, wq_), bq_);
  Tensor k = add(matmul(x, wk_), bk_);
  Tensor v = add(matmul(x, wv_), bv_);
  std::vector<Tensor> head_out;
  head_out.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh);
    Tensor kh = slice(k, 1, h * dh, dh);
    Tensor vh = slice(v, 1, h * dh, dh);
    Tensor logits = matmul(qh, transpose(kh));
    if (relative) {
      Tensor ah = slice(*relation_table, 1, h * dh, dh);          // [R, dh]
      Tensor qa = matmul(qh, transpose(ah));                       // [n, R]
      logits = add(logits, take_along_rows(qa, *relations, n));    // [n, n]
    }
    Tensor attn = softmax(scale(logits, inv_scale), 1);
    head_out.push_back(matmul(attn, vh));
  }
  Tensor attended = add(matmul(concat(head_out, 1), wo_), bo_);
  Tensor h1 = layer_norm(add(x, attended), ln1_g_, ln1_b_, eps_);
  Tensor ff = add(matmul(gelu(add(matmul(h1, w1_), b1_)), w2_), b2_);
  return layer_norm(add(h1, ff), ln2_g_, ln2_b_, eps_);
}

// ---------------------------------------------------------------------------

namespace {

Tensor add_unit_rows(ParameterStore& store, const std::string& name, std::size_t rows, std::size_t d,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> values(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        values[r * d + c] = dist(rng);
        norm += values[r * d + c] * values[r * d + c];
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (std::size_t c = 0; c < d; ++c) values[r * d + c] /= norm;
  }
  return store.add(name, {rows, d}, std::move(values));
}

}  // namespace

Model::Model(EncoderConfig config, Vocab vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), template_(vocab_, config_.template_text) {
  config_.validate();
  if (template_.size() > config_.max_len) {
    throw Error(ErrorCode::BadTemplate, config_.template_text, "template longer than max_len");
  }
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d;

  // SynEncoder: registered frozen.
  tok_emb_ = params_.add_normal("syn.tok_emb", {vocab_.size(), d}, 1.0, rng, true);
  pos_emb_ = params_.add_normal("syn.pos_emb", {config_.max_len, d}, config_.syn_position_std, rng, true);
  emb_ln_g_ = params_.add_constant("syn.emb_ln.g", {d}, 1.0, true);
  emb_ln_b_ = params_.add_constant("syn.emb_ln.b", {d}, 0.0, true);
  for (std::size_t l = 0; l < config_.syn_layers; ++l) {
    syn_layers_.emplace_back(params_, "syn.layer" + std::to_string(l), config_, rng, true);
  }

  // Tunable part.
  norm_g_ = params_.add_constant("norm.g", {d}, 1.0);
  norm_b_ = params_.add_constant("norm.b", {d}, 0.0);
  abs_position_ = params_.add_normal("sem.abs_pos", {config_.depth_clamp + 1, d}, config_.init_std, rng);
  relation_table_ = params_.add_normal("sem.rel_key", {kNumRelations, d}, config_.init_std, rng);
  for (std::size_t l = config_.syn_layers; l < config_.layers; ++l) {
    sem_layers_.emplace_back(params_, "sem.layer" + std::to_string(l), config_, rng, false);
  }
  prototypes_ = add_unit_rows(params_, "proto", kNumClasses, d, rng);
}

Tensor Model::syn_encode(const std::vector<std::size_t>& ids) const {
  if (ids.empty()) throw Error(ErrorCode::ShapeMismatch, "[0]", "empty token sequence");
  if (ids.size() > config_.max_len) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(ids.size()), "sequence longer than max_len");
  }
  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  Tensor x = layer_norm(add(embedding_gather(tok_emb_, ids), embedding_gather(pos_emb_, positions)), emb_ln_g_,
                        emb_ln_b_, config_.ln_eps);
  for (const TransformerLayer& layer : syn_layers_) x = layer.forward(x);
  return x;
}

Tensor Model::syn_encode_template() const { return syn_encode(template_.ids()); }

EncodedPair Model::encode(const Event& event, RankStrategy strategy, const Ablations& ablations) const {
  PropagationTree tree(event);
  EncodedPair pair;
  pair.sequence = build_event_sequence(vocab_, event, tree, strategy, config_.max_len, !ablations.responses);
  pair.template_states = syn_encode_template();
  pair.event_states = syn_encode(pair.sequence.tokens);
  pair.mask_index = template_.mask_index();

  const auto& nodes = pair.sequence.token_node;
  pair.token_depth.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    pair.token_depth[i] = std::min(tree.depth(nodes[i]), config_.depth_clamp);
  }

  const std::size_t p = template_.size();
  const std::size_t n = p + nodes.size();
  pair.relations.assign(n * n, static_cast<std::size_t>(Relation::none));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      pair.relations[(p + i) * n + (p + j)] = static_cast<std::size_t>(tree.relation(nodes[i], nodes[j]));
    }
  }
  return pair;
}

Tensor Model::normalize(const EncodedPair& pair) const {
  return layer_norm(concat({pair.template_states, pair.event_states}, 0), norm_g_, norm_b_, config_.ln_eps);
}

SemOutput Model::sem_encode(const Tensor& normalized, const EncodedPair& pair, const Ablations& ablations) const {
  const std::size_t total = pair.total_length();
  if (normalized.rank() != 2 || normalized.rows() != total || normalized.cols() != config_.d) {
    throw Error(ErrorCode::ShapeMismatch,
                shape_string(normalized.shape()) + " vs [" + std::to_string(total) + "," + std::to_string(config_.d) +
                    "]",
                "sem_encode input");
  }
  if (pair.relations.size() != total * total || pair.token_depth.size() != pair.event_length()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(pair.relations.size()), "position annotations");
  }
  Tensor x = normalized;
  if (!ablations.abs_position) {
    Tensor depth_rows = embedding_gather(abs_position_, pair.token_depth);
    Tensor template_rows = Tensor::zeros({pair.template_length(), config_.d});
    x = add(x, concat({template_rows, depth_rows}, 0));
  }
  for (const TransformerLayer& layer : sem_layers_) {
    x = ablations.rel_position ? layer.forward(x) : layer.forward(x, &relation_table_, &pair.relations);
  }
  return {x, slice(x, 0, pair.mask_index, 1)};
}

Tensor Model::mlm_logits(const Tensor& mask_state) const { return matmul(mask_state, transpose(tok_emb_)); }

}  // namespace rpl
