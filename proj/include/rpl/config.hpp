#pragma once

#include <cstdint>
#include "json.hpp"
#include <string>

#include "rpl/encoder.hpp"
#include "rpl/propagation_tree.hpp"
#include "rpl/tensor.hpp"

namespace rpl {

// Desk-scale defaults. Full-scale reference values: lr 1e-5, batch 16,
// k = 6 of 12 layers, o = 512.
struct TrainConfig {
  double alpha = 0.5;
  double vira_eps = 0.5;
  double lr = 3e-4;
  double weight_decay = 0.01;
  double tau = 1.0;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 13;
  RankStrategy strategy = RankStrategy::breadth_first;
  Ablations ablations;
  double heldout_fraction = 0.1;
  // Early-stopping split taken from the target set instead of the source
  // set. Leaks target labels into model selection.
  bool dev_from_target = false;
  Precision precision = Precision::f32;

  void validate() const;
};

struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
};

// Flat JSON object holding both the encoder and training keys, e.g.
//   {"d": 32, "heads": 4, "layers": 4, "syn_layers": 2, "max_len": 128,
//    "depth_clamp": 16, "template": "For this [MASK] story .", "alpha": 0.5,
//    "vira_eps": 0.5, "lr": 3e-4, "batch_size": 8, "max_epochs": 20,
//    "patience": 3, "seed": 13, "strategy": "bre", "ablate": ["RPP"], ...}
// Unknown keys are rejected.
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// "RR,APP,RPP,ViRA,PV" style list (case-insensitive).
Ablations parse_ablations(const std::string& list);
std::string ablations_string(const Ablations& ablations);

}  // namespace rpl
