#include "rpl/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rpl/error.hpp"

namespace rpl {

void TrainConfig::validate() const {
  auto fail = [](const char* key, const char* why) { throw Error(ErrorCode::BadConfig, key, why); };
  if (alpha < 0.0 || alpha > 1.0) fail("alpha", "must lie in [0, 1]");
  if (vira_eps < 0.0) fail("vira_eps", "must be non-negative");
  if (!(lr > 0.0)) fail("lr", "must be positive");
  if (weight_decay < 0.0) fail("weight_decay", "must be non-negative");
  if (!(tau > 0.0)) fail("tau", "must be positive");
  if (batch_size < 1) fail("batch_size", "must be at least 1");
  if (max_epochs < 1) fail("max_epochs", "must be at least 1");
  if (patience < 1) fail("patience", "must be at least 1");
  if (heldout_fraction <= 0.0 || heldout_fraction >= 1.0) fail("heldout_fraction", "must lie in (0, 1)");
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

Ablations parse_ablations(const std::string& list) {
  Ablations a;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    const std::string key = lower(item);
    if (key.empty()) continue;
    if (key == "rr") a.responses = true;
    else if (key == "app") a.abs_position = true;
    else if (key == "rpp") a.rel_position = true;
    else if (key == "vira") a.augmentation = true;
    else if (key == "pv") a.proto_verbalizer = true;
    else throw Error(ErrorCode::BadConfig, item, "unknown ablation (expected RR, APP, RPP, ViRA, PV)");
  }
  return a;
}

std::string ablations_string(const Ablations& a) {
  std::string out;
  auto put = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  put(a.responses, "RR");
  put(a.abs_position, "APP");
  put(a.rel_position, "RPP");
  put(a.augmentation, "ViRA");
  put(a.proto_verbalizer, "PV");
  return out;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json ablate = nlohmann::json::array();
  std::stringstream ss(ablations_string(c.train.ablations));
  for (std::string item; std::getline(ss, item, ',');) ablate.push_back(item);
  return {
      {"d", c.encoder.d},
      {"heads", c.encoder.heads},
      {"layers", c.encoder.layers},
      {"syn_layers", c.encoder.syn_layers},
      {"max_len", c.encoder.max_len},
      {"depth_clamp", c.encoder.depth_clamp},
      {"ffn_mult", c.encoder.ffn_mult},
      {"init_std", c.encoder.init_std},
      {"syn_position_std", c.encoder.syn_position_std},
      {"ln_eps", c.encoder.ln_eps},
      {"template", c.encoder.template_text},
      {"alpha", c.train.alpha},
      {"vira_eps", c.train.vira_eps},
      {"lr", c.train.lr},
      {"weight_decay", c.train.weight_decay},
      {"tau", c.train.tau},
      {"batch_size", c.train.batch_size},
      {"max_epochs", c.train.max_epochs},
      {"patience", c.train.patience},
      {"seed", c.train.seed},
      {"strategy", std::string(to_string(c.train.strategy))},
      {"ablate", ablate},
      {"heldout_fraction", c.train.heldout_fraction},
      {"dev_from_target", c.train.dev_from_target},
      {"precision", c.train.precision == Precision::f32 ? "f32" : "f64"},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config", "expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "d") c.encoder.d = v.get<std::size_t>();
      else if (key == "heads") c.encoder.heads = v.get<std::size_t>();
      else if (key == "layers") c.encoder.layers = v.get<std::size_t>();
      else if (key == "syn_layers" || key == "k") c.encoder.syn_layers = v.get<std::size_t>();
      else if (key == "max_len" || key == "o") c.encoder.max_len = v.get<std::size_t>();
      else if (key == "depth_clamp") c.encoder.depth_clamp = v.get<std::size_t>();
      else if (key == "ffn_mult") c.encoder.ffn_mult = v.get<std::size_t>();
      else if (key == "init_std") c.encoder.init_std = v.get<double>();
      else if (key == "syn_position_std") c.encoder.syn_position_std = v.get<double>();
      else if (key == "ln_eps") c.encoder.ln_eps = v.get<double>();
      else if (key == "template") c.encoder.template_text = v.get<std::string>();
      else if (key == "alpha") c.train.alpha = v.get<double>();
      else if (key == "vira_eps") c.train.vira_eps = v.get<double>();
      else if (key == "lr") c.train.lr = v.get<double>();
      else if (key == "weight_decay") c.train.weight_decay = v.get<double>();
      else if (key == "tau") c.train.tau = v.get<double>();
      else if (key == "batch_size") c.train.batch_size = v.get<std::size_t>();
      else if (key == "max_epochs") c.train.max_epochs = v.get<std::size_t>();
      else if (key == "patience") c.train.patience = v.get<std::size_t>();
      else if (key == "seed") c.train.seed = v.get<std::uint64_t>();
      else if (key == "strategy") c.train.strategy = parse_strategy(v.get<std::string>());
      else if (key == "ablate") {
        std::string list;
        for (const auto& item : v) list += item.get<std::string>() + ",";
        c.train.ablations = parse_ablations(list);
      }
      else if (key == "heldout_fraction") c.train.heldout_fraction = v.get<double>();
      else if (key == "dev_from_target") c.train.dev_from_target = v.get<bool>();
      else if (key == "precision") {
        const auto p = v.get<std::string>();
        if (p != "f32" && p != "f64") throw Error(ErrorCode::BadConfig, p, "precision must be f32 or f64");
        c.train.precision = p == "f32" ? Precision::f32 : Precision::f64;
      }
      else throw Error(ErrorCode::BadConfig, key, "unknown config key");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, "config", e.what());
  }
  c.encoder.validate();
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, path, e.what());
  }
  return run_config_from_json(j, std::move(base));
}

}  // namespace rpl
