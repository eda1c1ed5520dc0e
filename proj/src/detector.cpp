#include "rpl/detector.hpp"

#include <algorithm>

#include "rpl/error.hpp"

namespace rpl {

Detector Detector::create(const RunConfig& config, const std::vector<Event>& source) {
  config.encoder.validate();
  config.train.validate();
  std::vector<std::string> extra{config.encoder.template_text};
  for (const auto& words : LabelWordSet::default_words()) extra.insert(extra.end(), words.begin(), words.end());
  Vocab vocab = Vocab::build(source, extra);
  LabelWordSet words = LabelWordSet::defaults(vocab);
  return Detector{config, Model(config.encoder, std::move(vocab), config.train.seed), std::move(words)};
}

EncodedPair Detector::encode(const Event& event) const {
  return model.encode(event, config.train.strategy, config.train.ablations);
}

Tensor Detector::mask_state(const EncodedPair& pair) const {
  return model.sem_encode(model.normalize(pair), pair, config.train.ablations).mask_state;
}

Prediction Detector::predict(const EncodedPair& pair) const {
  NoGradScope no_grad;
  Tensor state = mask_state(pair);
  if (!config.train.ablations.proto_verbalizer) return rpl::predict(state.data(), model.prototypes(), config.train.tau);
  // Manual verbalizer: same tie rule as the prototype path.
  Prediction out;
  out.scores = manual_verbalize(model.mlm_logits(state).data(), label_words);
  out.label = out.scores[static_cast<std::size_t>(Label::rumor)] > out.scores[static_cast<std::size_t>(Label::non_rumor)]
                  ? Label::rumor
                  : Label::non_rumor;
  return out;
}

Prediction Detector::predict(const Event& event) const { return predict(encode(event)); }

void Detector::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "rpl-checkpoint";
  header["config"] = to_json(config);
  header["vocab"] = model.vocab().tokens();
  nlohmann::json words;
  for (Label y : {Label::rumor, Label::non_rumor}) {
    auto& list = words[std::string(to_string(y))] = nlohmann::json::array();
    for (std::size_t id : label_words.words[static_cast<std::size_t>(y)]) list.push_back(model.vocab().token(id));
  }
  header["label_words"] = words;
  save_checkpoint(path, header.dump(), model.params());
}

Detector Detector::load(const std::string& path) {
  CheckpointFile file = load_checkpoint(path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(file.header_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadCheckpoint, path, e.what());
  }
  if (!header.contains("config") || !header.contains("vocab") || !header.contains("label_words")) {
    throw Error(ErrorCode::BadCheckpoint, path, "header lacks config/vocab/label_words");
  }
  RunConfig config = run_config_from_json(header["config"]);
  Vocab vocab = Vocab::from_tokens(header["vocab"].get<std::vector<std::string>>());
  LabelWordSet words = LabelWordSet::from_json(header["label_words"].dump(), vocab, false);
  Detector detector{config, Model(config.encoder, std::move(vocab), config.train.seed), std::move(words)};
  apply_checkpoint(file, detector.model.params());
  return detector;
}

}  // namespace rpl
