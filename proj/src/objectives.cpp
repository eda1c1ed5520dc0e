#include "rpl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "rpl/error.hpp"
#include "rpl/log.hpp"

namespace rpl {

namespace {

void check_batch(const Tensor& states, std::span<const Label> labels, const char* op) {
  if (states.rank() != 2 || states.rows() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(states.shape()) + " vs " + std::to_string(labels.size()) +
                                              " labels", op);
  }
}

Tensor one_hot(std::span<const Label> labels) {
  std::vector<double> values(labels.size() * kNumClasses, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) values[i * kNumClasses + static_cast<std::size_t>(labels[i])] = 1.0;
  return Tensor::from({labels.size(), kNumClasses}, std::move(values));
}

}  // namespace

Tensor proto_loss(const Tensor& mask_states, std::span<const Label> labels, const Tensor& prototypes, double tau) {
  check_batch(mask_states, labels, "proto_loss");
  if (labels.empty()) throw Error(ErrorCode::EmptyDataset, "batch", "proto_loss needs at least one item");
  if (!(tau > 0.0)) throw Error(ErrorCode::BadConfig, "tau", "temperature must be positive");
  if (prototypes.rank() != 2 || prototypes.rows() != kNumClasses) {
    throw Error(ErrorCode::ShapeMismatch, shape_string(prototypes.shape()), "prototypes");
  }
  Tensor logp = log_softmax(scale(cosine_matrix(mask_states, prototypes), 1.0 / tau), 1);
  return scale(sum(mul(logp, one_hot(labels))), -1.0 / static_cast<double>(labels.size()));
}

Tensor contrastive_loss(const Tensor& mask_states, std::span<const Label> labels, double tau) {
  check_batch(mask_states, labels, "contrastive_loss");
  if (!(tau > 0.0)) throw Error(ErrorCode::BadConfig, "tau", "temperature must be positive");
  const std::size_t b = labels.size();
  std::array<std::size_t, kNumClasses> class_count{};
  for (Label y : labels) ++class_count[static_cast<std::size_t>(y)];

  std::vector<std::uint8_t> others(b * b, 1);
  std::vector<double> weights(b * b, 0.0);
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < b; ++i) {
    others[i * b + i] = 0;
    const std::size_t same = class_count[static_cast<std::size_t>(labels[i])];
    if (same < 2) continue;
    ++anchors;
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i && labels[j] == labels[i]) weights[i * b + j] = 1.0 / static_cast<double>(same - 1);
    }
  }
  if (anchors == 0) {
    logging::warn("contrastive loss: batch of " + std::to_string(b) + " has no positive pair; loss is 0");
    return Tensor::scalar(0.0);
  }
  Tensor logp = log_softmax_masked(scale(cosine_matrix(mask_states, mask_states), 1.0 / tau), others);
  return scale(sum(mul(logp, Tensor::from({b, b}, std::move(weights)))), -1.0 / static_cast<double>(anchors));
}

Tensor joint_loss(const Tensor& proto, const Tensor& contrastive, double alpha) {
  return add(scale(proto, alpha), scale(contrastive, 1.0 - alpha));
}

double joint_loss(double proto, double contrastive, double alpha) {
  return alpha * proto + (1.0 - alpha) * contrastive;
}

Prediction predict(std::span<const double> mask_state, const Tensor& prototypes, double tau) {
  if (prototypes.rank() != 2 || prototypes.rows() != kNumClasses || prototypes.cols() != mask_state.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                shape_string(prototypes.shape()) + " vs [" + std::to_string(mask_state.size()) + "]", "predict");
  }
  const std::size_t d = mask_state.size();
  double hn = 0.0;
  for (double v : mask_state) hn += v * v;
  hn = std::sqrt(hn);
  if (hn == 0.0) throw Error(ErrorCode::ZeroVector, "mask state");
  Prediction out;
  auto proto = prototypes.data();
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    double dot = 0.0, pn = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += mask_state[c] * proto[y * d + c];
      pn += proto[y * d + c] * proto[y * d + c];
    }
    if (pn == 0.0) throw Error(ErrorCode::ZeroVector, "prototype " + std::string(to_string(static_cast<Label>(y))));
    out.scores[y] = dot / (hn * std::sqrt(pn)) / tau;
  }
  const auto r = static_cast<std::size_t>(Label::rumor);
  const auto nr = static_cast<std::size_t>(Label::non_rumor);
  out.label = out.scores[r] > out.scores[nr] ? Label::rumor : Label::non_rumor;
  return out;
}

// ---------------------------------------------------------------------------
// Manual verbalizer baseline

std::array<std::vector<std::string>, kNumClasses> LabelWordSet::default_words() {
  std::array<std::vector<std::string>, kNumClasses> w;
  w[static_cast<std::size_t>(Label::rumor)] = {"rumor", "fake", "false"};
  w[static_cast<std::size_t>(Label::non_rumor)] = {"real", "true", "news"};
  return w;
}

void LabelWordSet::validate() const {
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    if (words[y].empty()) throw Error(ErrorCode::EmptyWordSet, std::string(to_string(static_cast<Label>(y))));
  }
  for (std::size_t a : words[0]) {
    if (std::find(words[1].begin(), words[1].end(), a) != words[1].end()) {
      throw Error(ErrorCode::BadConfig, std::to_string(a), "label word shared by both classes");
    }
  }
}

LabelWordSet LabelWordSet::defaults(Vocab& vocab) {
  LabelWordSet set;
  auto words = default_words();
  for (std::size_t y = 0; y < kNumClasses; ++y)
    for (const std::string& w : words[y]) set.words[y].push_back(vocab.add(w));
  set.validate();
  return set;
}

LabelWordSet LabelWordSet::from_json(const std::string& json_text, Vocab& vocab, bool extend) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "label words", e.what());
  }
  LabelWordSet set;
  for (Label y : {Label::rumor, Label::non_rumor}) {
    const std::string key(to_string(y));
    if (!j.contains(key) || !j[key].is_array()) throw Error(ErrorCode::EmptyWordSet, key);
    for (const auto& w : j[key]) {
      const auto token = w.get<std::string>();
      if (!extend && !vocab.contains(token)) throw Error(ErrorCode::BadConfig, token, "label word not in vocabulary");
      set.words[static_cast<std::size_t>(y)].push_back(extend ? vocab.add(token) : vocab.id(token));
    }
  }
  set.validate();
  return set;
}

std::array<double, kNumClasses> manual_verbalize(std::span<const double> mask_logits, const LabelWordSet& words) {
  words.validate();
  double mx = -INFINITY;
  for (double v : mask_logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : mask_logits) z += std::exp(v - mx);
  std::array<double, kNumClasses> score{};
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    for (std::size_t id : words.words[y]) {
      if (id >= mask_logits.size()) throw Error(ErrorCode::ShapeMismatch, std::to_string(id), "label word id");
      const double p = std::exp(mask_logits[id] - mx) / z;
      score[y] = words.aggregation == LabelWordSet::Aggregation::sum ? score[y] + p : std::max(score[y], p);
    }
  }
  const double total = score[0] + score[1];
  for (double& s : score) s /= total;
  return score;
}

Tensor manual_verbalizer_loss(const Tensor& logits, std::span<const Label> labels, const LabelWordSet& words) {
  check_batch(logits, labels, "manual_verbalizer_loss");
  words.validate();
  const std::size_t vocab = logits.cols();
  std::vector<double> select(vocab * kNumClasses, 0.0);
  for (std::size_t y = 0; y < kNumClasses; ++y)
    for (std::size_t id : words.words[y]) select.at(id * kNumClasses + y) = 1.0;
  Tensor mass = matmul(softmax(logits, 1), Tensor::from({vocab, kNumClasses}, std::move(select)));
  Tensor logp = log_softmax(log(mass), 1);
  return scale(sum(mul(logp, one_hot(labels))), -1.0 / static_cast<double>(labels.size()));
}

}  // namespace rpl
