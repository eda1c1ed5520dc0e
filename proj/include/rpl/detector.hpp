#pragma once

#include "json.hpp"
#include <string>
#include <vector>

#include "rpl/config.hpp"
#include "rpl/encoder.hpp"
#include "rpl/objectives.hpp"

namespace rpl {

// A model together with what inference needs: its run configuration and the
// label words used when the prototypical verbalizer is ablated.
struct Detector {
  RunConfig config;
  Model model;
  LabelWordSet label_words;

  // Vocabulary from the source events plus template and label words.
  static Detector create(const RunConfig& config, const std::vector<Event>& source);

  EncodedPair encode(const Event& event) const;
  // H^m for an encoded event; read-only over the parameters.
  Tensor mask_state(const EncodedPair& pair) const;
  Prediction predict(const EncodedPair& pair) const;
  Prediction predict(const Event& event) const;

  // Binary checkpoint (see parameters.hpp) whose header JSON carries
  // {"config", "vocab", "label_words"}.
  void save(const std::string& path) const;
  static Detector load(const std::string& path);
};

}  // namespace rpl
