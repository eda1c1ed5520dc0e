#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <random>
#include <sstream>
#include <string>

#include "rpl/error.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/grad_suite.hpp"
#include "rpl/log.hpp"
#include "rpl/objectives.hpp"
#include "rpl/synthetic.hpp"
#include "rpl/trainer.hpp"
#include "test_util.hpp"

using namespace rpl;

namespace {

// Tolerances and budgets.
constexpr double kTraversalSeconds = 1.0;
constexpr double kRelationSeconds = 10.0;
constexpr std::uint64_t kGradFirstSeed = 1;
constexpr std::size_t kGradSeeds = 10;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kFreezeSteps = 100;
constexpr double kViraNormTolerance = 1e-6;
constexpr double kViraProbeEps = 1e-3;
constexpr std::size_t kViraBatches = 50;
constexpr double kViraAscentFraction = 0.9;
constexpr double kViraSeconds = 60.0;
constexpr double kLn2Tolerance = 1e-6;
constexpr double kOneSidedValue = 0.31326;
constexpr double kOneSidedTolerance = 1e-5;
constexpr double kIdenticalPairTolerance = 1e-6;
constexpr double kLearnAccuracy = 0.95;
constexpr double kLearnCpuSecondsPerSeed = 300.0;
constexpr double kStructureGap = 0.10;
constexpr double kStructureCpuSeconds = 900.0;
constexpr double kNullLow = 0.40, kNullHigh = 0.60;
constexpr double kPlateauTolerance = 0.05;
constexpr double kMetricTolerance = 1e-9;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

// Desk-scale run used by the training criteria: d=32, L=4, k=2.
RunConfig desk_config(std::uint64_t seed) {
  RunConfig c;
  c.encoder.d = 32;
  c.encoder.heads = 4;
  c.encoder.layers = 4;
  c.encoder.syn_layers = 2;
  c.train.lr = 1e-3;
  c.train.tau = 1.0;
  c.train.weight_decay = 0.1;
  c.train.max_epochs = 30;
  c.train.patience = 30;
  c.train.seed = seed;
  return c;
}

// Structural runs: three tunable layers, sharper temperature and a longer
// schedule. ViRA is ablated in both arms.
RunConfig structural_config(std::uint64_t seed) {
  RunConfig c = desk_config(seed);
  c.encoder.syn_layers = 1;
  c.train.tau = 0.1;
  c.train.max_epochs = 80;
  c.train.patience = 80;
  c.train.ablations.augmentation = true;
  return c;
}
constexpr std::size_t kStructuralFillers = 5;

// 200 training events and 100 held-out events from disjoint generator seeds.
struct Split {
  std::vector<Event> train, test;
};

Split synthetic_split(SynthSpec::Mode mode, std::uint64_t seed, std::size_t signal_window = 0,
                      std::size_t fillers = 200) {
  SynthSpec s;
  s.mode = mode;
  s.signal_window = signal_window;
  s.vocab_size = fillers;
  s.events_per_class = 100;
  s.seed = seed;
  Split out;
  out.train = generate_synthetic(s);
  s.events_per_class = 50;
  s.seed = seed + 1000;
  s.id_prefix = "ho";
  out.test = generate_synthetic(s);
  return out;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// -- 1 ---------------------------------------------------------------------

Outcome traversal() {
  const auto t0 = std::chrono::steady_clock::now();
  const PropagationTree tree(testing::example_event());
  const std::map<RankStrategy, std::vector<std::string>> expected{
      {RankStrategy::chronological, {"x1", "x2", "x3", "x4", "x5", "x6"}},
      {RankStrategy::inverted, {"x6", "x5", "x4", "x3", "x2", "x1"}},
      {RankStrategy::depth_first, {"x1", "x2", "x5", "x3", "x4", "x6"}},
      {RankStrategy::breadth_first, {"x1", "x3", "x2", "x4", "x5", "x6"}},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [strategy, order] : expected) {
    const auto got = rank_responses(tree, strategy).order;
    ok &= got == order;
    detail += std::string(to_string(strategy)) + "=";
    for (const auto& id : got) detail += id + (id == got.back() ? " " : ",");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < kTraversalSeconds, detail + fmt(secs) + "s"};
}

// -- 2 ---------------------------------------------------------------------

Outcome relations() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::size_t pairs = 0, mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Event e = testing::random_event(rng, rng() % 30, "t" + std::to_string(trial));
    std::map<std::string, std::string> parent;
    std::map<std::string, std::pair<std::int64_t, std::string>> key{{e.claim.id, {e.claim.timestamp, e.claim.id}}};
    std::vector<std::string> ids{e.claim.id};
    for (const Post& p : e.posts) {
      parent[p.id] = p.parent_id.value_or(e.claim.id);
      key[p.id] = {p.timestamp, p.id};
      ids.push_back(p.id);
    }
    const PropagationTree tree(e);
    for (const auto& a : ids) {
      for (const auto& b : ids) {
        Relation want = Relation::none;
        if (a == b) want = Relation::itself;
        else if (parent.contains(a) && parent[a] == b) want = Relation::parent_plus;
        else if (parent.contains(b) && parent[b] == a) want = Relation::children_minus;
        else if (parent.contains(a) && parent.contains(b) && parent[a] == parent[b])
          want = key[b] < key[a] ? Relation::siblings_plus : Relation::siblings_minus;
        mismatches += relative_relation(tree, a, b) != want;
        ++pairs;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < kRelationSeconds,
          std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + "s"};
}

// -- 3 ---------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_grad_suite(kGradFirstSeed, kGradSeeds);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t failed = 0;
  double worst_op = 0.0, worst_composite = 0.0;
  for (const auto& r : results) {
    failed += !r.passed();
    (r.composite ? worst_composite : worst_op) = std::max(r.composite ? worst_composite : worst_op, r.error);
  }
  return {failed == 0 && secs < kGradSeconds,
          std::to_string(results.size()) + " checks, " + std::to_string(failed) + " failed, worst op " +
              fmt(worst_op, 3) + ", worst composite " + fmt(worst_composite, 3) + ", " + fmt(secs) + "s"};
}

// -- 4 ---------------------------------------------------------------------

Outcome freeze() {
  const Split data = synthetic_split(SynthSpec::Mode::lexical, 7);
  RunConfig cfg = desk_config(7);
  Detector det = Detector::create(cfg, data.train);
  std::vector<EncodedPair> pairs;
  std::vector<Label> labels;
  for (const Event& e : data.train) {
    pairs.push_back(det.encode(e));
    labels.push_back(*e.label);
  }
  const std::uint64_t frozen = det.model.params().checksum(true);
  const std::uint64_t all = det.model.params().checksum(false);
  Trainer trainer(det);
  const std::size_t b = cfg.train.batch_size;
  for (std::size_t step = 0; step < kFreezeSteps; ++step) {
    const std::size_t start = (step * b) % (pairs.size() - b);
    std::vector<const EncodedPair*> batch;
    for (std::size_t k = start; k < start + b; ++k) batch.push_back(&pairs[k]);
    trainer.train_step(batch, std::span<const Label>(labels).subspan(start, b), step);
  }
  const bool same = det.model.params().checksum(true) == frozen;
  const bool moved = det.model.params().checksum(false) != all;
  return {same && moved, std::to_string(trainer.steps()) + " steps, frozen checksum " + (same ? "unchanged" : "CHANGED") +
                             ", trainable " + (moved ? "updated" : "NOT updated")};
}

// -- 5 ---------------------------------------------------------------------

Outcome vira() {
  const auto t0 = std::chrono::steady_clock::now();
  const Split data = synthetic_split(SynthSpec::Mode::lexical, 5);
  RunConfig cfg = desk_config(5);
  cfg.train.precision = Precision::f64;
  Detector det = Detector::create(cfg, data.train);
  PrecisionScope f64(Precision::f64);

  // Contracts on real layer-normalised embeddings and real loss gradients.
  double worst_norm = 0.0;
  std::size_t moved_outside = 0, masked_rows = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const EncodedPair pair = det.encode(data.train[i]);
    const Tensor e = det.model.normalize(pair);
    const Tensor h = det.model.sem_encode(e, pair).mask_state;
    const Label y[] = {*data.train[i].label};
    proto_loss(h, y, det.model.prototypes(), cfg.train.tau).backward();
    const auto mask = pair.perturb_mask();
    const Tensor out = vira_perturb(e, e.grad(), mask, cfg.train.vira_eps);
    const std::size_t d = e.cols();
    for (std::size_t t = 0; t < mask.size(); ++t) {
      double norm = 0.0;
      bool changed = false;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = out.data()[t * d + c] - e.data()[t * d + c];
        norm += diff * diff;
        changed |= out.data()[t * d + c] != e.data()[t * d + c];
      }
      if (mask[t]) {
        ++masked_rows;
        worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm) - cfg.train.vira_eps));
      } else {
        moved_outside += changed;
      }
    }
    det.model.params().zero_grad();
  }

  // First-order ascent with a small step.
  Trainer trainer(det);
  std::mt19937_64 rng(55);
  std::size_t ascents = 0;
  for (std::size_t trial = 0; trial < kViraBatches; ++trial) {
    std::vector<EncodedPair> pairs;
    std::vector<Label> labels;
    for (std::size_t k = 0; k < cfg.train.batch_size; ++k) {
      const Event& ev = data.train[rng() % data.train.size()];
      pairs.push_back(det.encode(ev));
      labels.push_back(*ev.label);
    }
    std::vector<const EncodedPair*> batch;
    for (const EncodedPair& p : pairs) batch.push_back(&p);
    const auto [plain, perturbed] = trainer.probe_losses(batch, labels, kViraProbeEps);
    ascents += perturbed >= plain;
  }
  const double fraction = static_cast<double>(ascents) / kViraBatches;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_norm <= kViraNormTolerance && moved_outside == 0 && masked_rows > 0 &&
              fraction >= kViraAscentFraction && secs < kViraSeconds,
          "worst |norm-eps| " + fmt(worst_norm, 3) + " over " + std::to_string(masked_rows) + " rows, " +
              std::to_string(moved_outside) + " unmasked rows moved, ascent " + std::to_string(ascents) + "/" +
              std::to_string(kViraBatches) + ", " + fmt(secs) + "s"};
}

// -- 6 ---------------------------------------------------------------------

Outcome loss_values() {
  PrecisionScope f64(Precision::f64);
  const Tensor protos = Tensor::from({2, 3}, {1.0, 0.0, 0.0, 0.0, 1.0, 0.0});
  const Label rumor[] = {Label::rumor};
  const double sym = proto_loss(Tensor::from({1, 3}, {0.0, 0.0, 1.0}), rumor, protos, 1.0).item();
  const double one_sided = proto_loss(Tensor::from({1, 3}, {0.0, 1.0, 0.0}), rumor, protos, 1.0).item();
  const Label two[] = {Label::rumor, Label::rumor};
  const double identical = contrastive_loss(Tensor::from({2, 3}, {0.3, -1.0, 2.0, 0.3, -1.0, 2.0}), two, 1.0).item();
  const Label mixed[] = {Label::rumor, Label::rumor, Label::non_rumor};
  const double singleton =
      contrastive_loss(Tensor::from({3, 2}, {1.0, 0.5, 0.2, 1.0, -1.0, 0.4}), mixed, 1.0).item();
  const bool ok = std::abs(sym - std::log(2.0)) <= kLn2Tolerance &&
                  std::abs(one_sided - kOneSidedValue) <= kOneSidedTolerance &&
                  std::abs(identical) <= kIdenticalPairTolerance && std::isfinite(singleton);
  return {ok, "symmetric " + fmt(sym, 10) + ", one-sided " + fmt(one_sided, 10) + ", identical pair " +
                  fmt(identical, 3) + ", singleton class " + fmt(singleton, 6)};
}

// -- 7, 8, 9 -----------------------------------------------------------------

struct RunResult {
  double accuracy = 0.0;
  double cpu = 0.0;
  std::size_t best_epoch = 0;
};

RunResult train_and_score(const Split& data, const RunConfig& cfg) {
  const double c0 = cpu_seconds();
  const TrainResult r = train(data.train, cfg);
  const MetricReport report = evaluate(r.detector, data.test);
  return {report.accuracy, cpu_seconds() - c0, r.history.best_epoch};
}

Outcome learnability() {
  double sum = 0.0, worst_cpu = 0.0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const RunResult r = train_and_score(synthetic_split(SynthSpec::Mode::lexical, seed), desk_config(seed));
    sum += r.accuracy;
    worst_cpu = std::max(worst_cpu, r.cpu);
    detail += "seed " + std::to_string(seed) + ": " + fmt(r.accuracy) + " (" + fmt(r.cpu, 3) + " cpu-s) ";
  }
  const double mean = sum / std::size(kSeeds);
  return {mean >= kLearnAccuracy && worst_cpu <= kLearnCpuSecondsPerSeed, detail + "mean " + fmt(mean)};
}

Outcome structure() {
  double gap_sum = 0.0, cpu = 0.0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const Split data = synthetic_split(SynthSpec::Mode::structural, seed, 0, kStructuralFillers);
    const RunConfig full = structural_config(seed);
    RunConfig ablated = full;
    ablated.train.ablations.rel_position = true;
    const RunResult a = train_and_score(data, full);
    const RunResult b = train_and_score(data, ablated);
    gap_sum += a.accuracy - b.accuracy;
    cpu += a.cpu + b.cpu;
    detail += "seed " + std::to_string(seed) + ": full " + fmt(a.accuracy) + " w/o RPP " + fmt(b.accuracy) + " ";
  }
  const double gap = gap_sum / std::size(kSeeds);
  return {gap >= kStructureGap && cpu <= kStructureCpuSeconds,
          detail + "mean gap " + fmt(gap) + ", " + fmt(cpu, 4) + " cpu-s"};
}

Outcome no_leakage() {
  double sum = 0.0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const RunResult r = train_and_score(synthetic_split(SynthSpec::Mode::null, seed), desk_config(seed));
    sum += r.accuracy;
    detail += "seed " + std::to_string(seed) + ": " + fmt(r.accuracy) + " ";
  }
  const double mean = sum / std::size(kSeeds);
  return {mean >= kNullLow && mean <= kNullHigh, detail + "mean " + fmt(mean)};
}

// -- 10 --------------------------------------------------------------------

Outcome early_detection() {
  const Split data = synthetic_split(SynthSpec::Mode::lexical, 21, 2);
  const TrainResult r = train(data.train, desk_config(21));
  const std::vector<std::int64_t> values{0, 1, 2, 3, 5, 8, 1000};
  std::vector<Checkpoint> cps;
  for (std::int64_t v : values) cps.push_back({Checkpoint::Kind::post_count, v});
  const CheckpointSeries series = early_detection_curve(r.detector, data.test, cps);
  const MetricReport full = evaluate(r.detector, data.test);
  const bool identity = series.points.back().report == full;

  bool nested = true;
  for (const Event& e : data.test) {
    std::multiset<std::string> prev;
    for (const Checkpoint& cp : cps) {
      std::multiset<std::string> tokens;
      const Event f = filter_by_checkpoint(e, cp);
      for (const Post& p : f.posts) {
        std::istringstream in(p.text);
        for (std::string w; in >> w;) tokens.insert(w);
      }
      nested &= std::includes(tokens.begin(), tokens.end(), prev.begin(), prev.end());
      prev = std::move(tokens);
    }
  }

  const double plateau = series.points.back().report.macro_f1;
  double at2 = 0.0;
  std::string curve;
  for (const auto& p : series.points) {
    if (p.checkpoint.value == 2) at2 = p.report.macro_f1;
    curve += std::to_string(p.checkpoint.value) + ":" + fmt(p.report.macro_f1, 3) + " ";
  }
  const bool reached = at2 >= plateau - kPlateauTolerance;
  return {identity && nested && reached, std::string("identity ") + (identity ? "exact" : "BROKEN") + ", nesting " +
                                             (nested ? "ok" : "BROKEN") + ", curve " + curve + "plateau " +
                                             fmt(plateau, 3) + " count-2 " + fmt(at2, 3)};
}

// -- 11 --------------------------------------------------------------------

Outcome metrics() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<Label> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<Label>(rng() & 1);
      pred[i] = static_cast<Label>(rng() % 3 == 0);
    }
    double naive = 0.0;
    for (int c = 0; c < 2; ++c) {
      const Label y = static_cast<Label>(c);
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += pred[i] == y && gold[i] == y;
        fp += pred[i] == y && gold[i] != y;
        fn += pred[i] != y && gold[i] == y;
      }
      const double p = tp + fp ? tp / (tp + fp) : 0.0, r = tp + fn ? tp / (tp + fn) : 0.0;
      naive += p + r ? 2 * p * r / (p + r) / 2.0 : 0.0;
    }
    worst = std::max(worst, std::abs(compute_metrics(gold, pred).macro_f1 - naive));
  }
  return {worst <= kMetricTolerance, "1000 pairs, worst difference " + fmt(worst, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  logging::set_quiet(true);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"traversal oracle", traversal},
      {"relation oracle", relations},
      {"gradient suite", gradients},
      {"freeze contract", freeze},
      {"ViRA contracts", vira},
      {"loss point values", loss_values},
      {"lexical learnability", learnability},
      {"structure sensitivity", structure},
      {"no-leakage control", no_leakage},
      {"early detection", early_detection},
      {"metrics oracle", metrics},
  };
  // Optional arguments select criteria by number.
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures ? 1 : 0;
}
