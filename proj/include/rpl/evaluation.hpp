#pragma once

#include <array>
#include "json.hpp"
#include <span>
#include <string>
#include <vector>

#include "rpl/detector.hpp"
#include "rpl/propagation_tree.hpp"

namespace rpl {

// Per-class counts, indexed by Label value.
struct ConfusionCounts {
  std::array<std::size_t, kNumClasses> tp{}, fp{}, fn{};
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumClasses> f1{};  // indexed by Label value
  std::size_t events = 0;
  ConfusionCounts counts;

  bool operator==(const MetricReport& other) const;
};

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> predicted);
// F1 uses 0/0 -> 0; macro-F1 is the unweighted mean of the two class F1s.
MetricReport report_from(const ConfusionCounts& counts);
MetricReport compute_metrics(std::span<const Label> gold, std::span<const Label> predicted);

// Scores target events (gold labels required, never shown to the model).
// Throws Error(EmptyDataset) on an empty set.
MetricReport evaluate(const Detector& detector, const std::vector<Event>& target);
MetricReport evaluate_encoded(const Detector& detector, const std::vector<EncodedPair>& pairs,
                              std::span<const Label> gold);

struct CheckpointResult {
  Checkpoint checkpoint;
  MetricReport report;
};

struct CheckpointSeries {
  std::vector<CheckpointResult> points;
};

// Each checkpoint re-filters, re-ranks and re-encodes every event from
// scratch. Checkpoints must share a kind and increase strictly.
CheckpointSeries early_detection_curve(const Detector& detector, const std::vector<Event>& target,
                                       const std::vector<Checkpoint>& checkpoints);

nlohmann::json to_json(const MetricReport& report);
std::string to_csv(const MetricReport& report);          // header + one row
std::string to_csv(const CheckpointSeries& series);      // checkpoint,macro_f1
nlohmann::json to_json(const CheckpointSeries& series);

}  // namespace rpl
