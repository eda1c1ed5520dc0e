// rpl: command-line front end for the response-aware prompt learning pipeline.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rpl/config.hpp"
#include "rpl/detector.hpp"
#include "rpl/error.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/grad_suite.hpp"
#include "rpl/log.hpp"
#include "rpl/manifest.hpp"
#include "rpl/propagation_tree.hpp"
#include "rpl/synthetic.hpp"
#include "rpl/trainer.hpp"

namespace {

using namespace rpl;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitUsage = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss: return kExitNumeric;
    case ErrorCode::BadConfig: return kExitUsage;
    default: return kExitData;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, path.string(), "cannot write");
  out << text;
}

std::string command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

std::string best_effort_id(const std::string& line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_object() && j.contains("id") && j["id"].is_string()) return j["id"].get<std::string>();
  return "?";
}

int cmd_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
  std::string line;
  std::size_t line_no = 0, count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      PropagationTree tree(parse_event(line));
      ++count;
    } catch (const Error& e) {
      std::cout << "invalid event " << best_effort_id(line) << " (line " << line_no << "): " << e.what() << '\n';
      return kExitData;
    }
  }
  std::cout << "ok: " << count << " events\n";
  return kExitOk;
}

int cmd_stats(const std::string& path) {
  const DatasetStats s = dataset_stats(read_events(path));
  nlohmann::ordered_json j{{"events", s.events},         {"nodes", s.nodes},
                           {"rumors", s.rumors},         {"non_rumors", s.non_rumors},
                           {"avg_time_span_hours", s.avg_time_span_hours}, {"avg_depth", s.avg_depth}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_rank(const std::string& path, const std::string& strategy) {
  const RankStrategy s = parse_strategy(strategy);
  for (const Event& e : read_events(path)) {
    const RankedThread ranked = rank_responses(PropagationTree(e), s);
    std::string line;
    for (const std::string& id : ranked.order) {
      if (!line.empty()) line += ' ';
      line += id;
    }
    std::cout << line << '\n';
  }
  return kExitOk;
}

struct TrainArgs {
  std::string source, config, out, target, strategy, ablate;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t epochs = 0;
  double lr = 0.0;
  bool dev_from_target = false;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed_set) config.train.seed = a.seed;
  if (!a.strategy.empty()) config.train.strategy = parse_strategy(a.strategy);
  if (a.epochs) config.train.max_epochs = a.epochs;
  if (a.lr > 0.0) config.train.lr = a.lr;
  if (!a.ablate.empty()) config.train.ablations = parse_ablations(a.ablate);
  if (a.dev_from_target) config.train.dev_from_target = true;
  config.encoder.validate();
  config.train.validate();
  return config;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"loss", r.mean_loss.average},
          {"proto", r.mean_loss.proto},
          {"contrastive", r.mean_loss.contrastive},
          {"heldout", to_json(r.heldout)},
          {"heldout_loss", r.heldout_loss}};
}

int cmd_train(const TrainArgs& a, const std::string& cmdline) {
  const RunConfig config = resolve_config(a);
  const auto source = read_events(a.source);
  std::vector<Event> target;
  if (!a.target.empty()) target = read_events(a.target);
  if (config.train.dev_from_target && target.empty()) {
    throw Error(ErrorCode::BadConfig, "dev_from_target", "needs --target");
  }
  TrainResult result = train(source, config, target.empty() ? nullptr : &target, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.mean_loss.average << " heldout acc " << r.heldout.accuracy
              << " macro-f1 " << r.heldout.macro_f1 << '\n';
  });
  result.detector.save(a.out);

  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : result.history.epochs) history.push_back(to_json(r));
  nlohmann::json sidecar{{"config", to_json(config)},
                         {"seed", config.train.seed},
                         {"best_epoch", result.history.best_epoch},
                         {"stopping_epoch", result.history.stopping_epoch},
                         {"steps", result.history.steps},
                         {"history", history}};
  if (!target.empty() && !config.train.dev_from_target) sidecar["target"] = to_json(evaluate(result.detector, target));
  const std::string sidecar_path = a.out + ".json";
  write_text(sidecar_path, sidecar.dump(2) + "\n");

  RunManifest m;
  m.command = cmdline;
  m.config = to_json(config);
  m.seed = config.train.seed;
  m.add_input(a.source);
  if (!a.config.empty()) m.add_input(a.config);
  if (!a.target.empty()) m.add_input(a.target);
  m.outputs = {a.out, sidecar_path};
  m.write(a.out + ".manifest.json");
  std::cout << sidecar.dump(2) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& target_path, const std::string& out, std::uint64_t seed,
             const std::string& cmdline) {
  const Detector detector = Detector::load(ckpt);
  const MetricReport report = evaluate(detector, read_events(target_path));
  const nlohmann::json j = to_json(report);
  write_text(out + ".json", j.dump(2) + "\n");
  write_text(out + ".csv", to_csv(report));

  RunManifest m;
  m.command = cmdline;
  m.config = to_json(detector.config);
  m.seed = seed;
  m.add_input(ckpt);
  m.add_input(target_path);
  m.outputs = {out + ".json", out + ".csv"};
  m.write(out + ".manifest.json");
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

std::vector<Checkpoint> parse_checkpoints(const std::string& kind, const std::string& list) {
  const Checkpoint::Kind k = parse_checkpoint_kind(kind);
  std::vector<Checkpoint> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back({k, v});
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, item, "checkpoint values must be non-negative integers");
    }
  }
  if (out.empty()) throw Error(ErrorCode::BadConfig, "checkpoints", "empty list");
  return out;
}

int cmd_early_detect(const std::string& ckpt, const std::string& target_path, const std::string& kind,
                     const std::string& list, const std::string& out, std::uint64_t seed, const std::string& cmdline) {
  const auto checkpoints = parse_checkpoints(kind, list);
  const Detector detector = Detector::load(ckpt);
  const CheckpointSeries series = early_detection_curve(detector, read_events(target_path), checkpoints);
  write_text(out + ".csv", to_csv(series));
  write_text(out + ".json", to_json(series).dump(2) + "\n");

  RunManifest m;
  m.command = cmdline;
  m.config = to_json(detector.config);
  m.seed = seed;
  m.add_input(ckpt);
  m.add_input(target_path);
  m.outputs = {out + ".csv", out + ".json"};
  m.write(out + ".manifest.json");
  std::cout << to_csv(series);
  return kExitOk;
}

int cmd_grad_check(std::uint64_t seed, std::size_t seeds, bool verbose) {
  const auto results = run_grad_suite(seed, seeds);
  std::map<std::string, std::pair<double, double>> worst;  // name -> (error, tolerance)
  std::vector<std::string> order;
  bool ok = true;
  for (const GradCheckResult& r : results) {
    if (!worst.contains(r.name)) order.push_back(r.name);
    auto& w = worst[r.name];
    w.first = std::max(w.first, r.error);
    w.second = r.tolerance;
    ok = ok && r.passed();
    if (verbose) std::cout << r.name << " seed=" << r.seed << " err=" << r.error << '\n';
  }
  for (const std::string& name : order) {
    const auto [err, tol] = worst[name];
    std::cout << (err < tol ? "ok   " : "FAIL ") << name << " max_rel_err=" << err << " tol=" << tol << '\n';
  }
  std::cout << (ok ? "all gradient checks passed" : "gradient checks FAILED") << " (" << results.size()
            << " checks)\n";
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Response-aware prompt learning for zero-shot rumor detection"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Silence warnings");

  std::uint64_t seed = 13;
  bool seed_set = false;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          seed = v;
          seed_set = true;
        },
        "RNG seed");
  };

  std::string input;
  auto* validate = app.add_subcommand("validate", "Check every event in a JSONL file");
  validate->add_option("jsonl", input)->required();
  add_seed(validate);

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("jsonl", input)->required();
  add_seed(stats);

  std::string strategy = "bre";
  auto* rank = app.add_subcommand("rank", "Print the response ranking of each event");
  rank->add_option("jsonl", input)->required();
  rank->add_option("--strategy", strategy, "cho|inv|dep|bre")->capture_default_str();
  add_seed(rank);

  SynthSpec spec;
  std::string mode = "lexical", synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--mode", mode, "lexical|structural|null")->capture_default_str();
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--events-per-class", spec.events_per_class)->capture_default_str();
  synth->add_option("--min-posts", spec.min_posts)->capture_default_str();
  synth->add_option("--max-posts", spec.max_posts)->capture_default_str();
  synth->add_option("--vocab-size", spec.vocab_size)->capture_default_str();
  synth->add_option("--signal-window", spec.signal_window, "Only the earliest N posts carry signal")
      ->capture_default_str();
  synth->add_option("--id-prefix", spec.id_prefix)->capture_default_str();
  add_seed(synth);

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "Train on labelled source events");
  train_cmd->add_option("--source", targs.source)->required();
  train_cmd->add_option("--config", targs.config, "Flat JSON config");
  train_cmd->add_option("--out", targs.out, "Checkpoint path")->required();
  train_cmd->add_option("--target", targs.target, "Target events, scored after training");
  train_cmd->add_option("--strategy", targs.strategy, "cho|inv|dep|bre");
  train_cmd->add_option("--epochs", targs.epochs);
  train_cmd->add_option("--lr", targs.lr);
  train_cmd->add_option("--ablate", targs.ablate, "Comma list of RR,APP,RPP,ViRA,PV");
  train_cmd->add_flag("--dev-from-target", targs.dev_from_target,
                      "Hold out part of the labelled target for early stopping (leaks target labels)");
  add_seed(train_cmd);

  std::string ckpt, target, out = "eval_report";
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on labelled target events");
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--target", target)->required();
  eval->add_option("--out", out, "Report path prefix")->capture_default_str();
  add_seed(eval);

  std::string kind = "count", checkpoints, early_out = "early_detection";
  auto* early = app.add_subcommand("early-detect", "Macro-F1 at increasing content checkpoints");
  early->add_option("--ckpt", ckpt)->required();
  early->add_option("--target", target)->required();
  early->add_option("--kind", kind, "count|elapsed")->capture_default_str();
  early->add_option("--checkpoints", checkpoints, "Comma list, strictly increasing")->required();
  early->add_option("--out", early_out, "Report path prefix")->capture_default_str();
  add_seed(early);

  std::size_t seeds = 10;
  bool verbose = false;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  grad->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();
  grad->add_flag("-v,--verbose", verbose, "One line per check");
  add_seed(grad);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  logging::set_quiet(quiet);
  const std::string cmdline = command_line(argc, argv);

  try {
    if (*validate) return cmd_validate(input);
    if (*stats) return cmd_stats(input);
    if (*rank) return cmd_rank(input, strategy);
    if (*synth) {
      spec.mode = parse_synth_mode(mode);
      if (seed_set) spec.seed = seed;
      write_events(synth_out, generate_synthetic(spec));
      return kExitOk;
    }
    if (*train_cmd) {
      targs.seed = seed;
      targs.seed_set = seed_set;
      return cmd_train(targs, cmdline);
    }
    if (*eval) return cmd_eval(ckpt, target, out, seed, cmdline);
    if (*early) return cmd_early_detect(ckpt, target, kind, checkpoints, early_out, seed, cmdline);
    if (*grad) return cmd_grad_check(seed_set ? seed : 1, seeds, verbose);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
