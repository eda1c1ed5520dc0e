#include "rpl/evaluation.hpp"

#include <sstream>

#include "rpl/error.hpp"

namespace rpl {

bool MetricReport::operator==(const MetricReport& o) const {
  return accuracy == o.accuracy && macro_f1 == o.macro_f1 && f1 == o.f1 && events == o.events &&
         counts.tp == o.counts.tp && counts.fp == o.counts.fp && counts.fn == o.counts.fn &&
         counts.correct == o.counts.correct && counts.total == o.counts.total;
}

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> predicted) {
  if (gold.size() != predicted.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(gold.size()) + " vs " + std::to_string(predicted.size()),
                "gold/prediction lengths");
  }
  ConfusionCounts c;
  c.total = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(gold[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (g == p) {
      ++c.tp[g];
      ++c.correct;
    } else {
      ++c.fp[p];
      ++c.fn[g];
    }
  }
  return c;
}

MetricReport report_from(const ConfusionCounts& c) {
  MetricReport r;
  r.counts = c;
  r.events = c.total;
  r.accuracy = c.total ? static_cast<double>(c.correct) / static_cast<double>(c.total) : 0.0;
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    const double denom = 2.0 * static_cast<double>(c.tp[y]) + static_cast<double>(c.fp[y] + c.fn[y]);
    r.f1[y] = denom > 0.0 ? 2.0 * static_cast<double>(c.tp[y]) / denom : 0.0;
  }
  r.macro_f1 = (r.f1[0] + r.f1[1]) / 2.0;
  return r;
}

MetricReport compute_metrics(std::span<const Label> gold, std::span<const Label> predicted) {
  return report_from(confusion(gold, predicted));
}

namespace {

std::vector<Label> gold_labels(const std::vector<Event>& events) {
  std::vector<Label> gold;
  gold.reserve(events.size());
  for (const Event& e : events) {
    if (!e.label) throw Error(ErrorCode::ParseError, e.id, "target event has no gold label to score against");
    gold.push_back(*e.label);
  }
  return gold;
}

}  // namespace

MetricReport evaluate_encoded(const Detector& detector, const std::vector<EncodedPair>& pairs,
                              std::span<const Label> gold) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "target");
  std::vector<Label> predicted;
  predicted.reserve(pairs.size());
  for (const EncodedPair& pair : pairs) predicted.push_back(detector.predict(pair).label);
  return compute_metrics(gold, predicted);
}

MetricReport evaluate(const Detector& detector, const std::vector<Event>& target) {
  if (target.empty()) throw Error(ErrorCode::EmptyDataset, "target");
  const auto gold = gold_labels(target);
  std::vector<Label> predicted;
  predicted.reserve(target.size());
  for (const Event& e : target) predicted.push_back(detector.predict(e).label);
  return compute_metrics(gold, predicted);
}

CheckpointSeries early_detection_curve(const Detector& detector, const std::vector<Event>& target,
                                       const std::vector<Checkpoint>& checkpoints) {
  if (target.empty()) throw Error(ErrorCode::EmptyDataset, "target");
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i].kind != checkpoints[0].kind) {
      throw Error(ErrorCode::BadConfig, "checkpoints", "all checkpoints must share one kind");
    }
    if (checkpoints[i].value <= checkpoints[i - 1].value) {
      throw Error(ErrorCode::BadConfig, std::to_string(checkpoints[i].value), "checkpoints must increase strictly");
    }
  }
  CheckpointSeries series;
  for (const Checkpoint& cp : checkpoints) {
    std::vector<Event> visible;
    visible.reserve(target.size());
    for (const Event& e : target) visible.push_back(filter_by_checkpoint(e, cp));
    series.points.push_back({cp, evaluate(detector, visible)});
  }
  return series;
}

nlohmann::json to_json(const MetricReport& r) {
  return {
      {"events", r.events},
      {"accuracy", r.accuracy},
      {"macro_f1", r.macro_f1},
      {"f1_rumor", r.f1[static_cast<std::size_t>(Label::rumor)]},
      {"f1_non_rumor", r.f1[static_cast<std::size_t>(Label::non_rumor)]},
  };
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "events,accuracy,macro_f1,f1_rumor,f1_non_rumor\n"
     << r.events << ',' << r.accuracy << ',' << r.macro_f1 << ',' << r.f1[static_cast<std::size_t>(Label::rumor)] << ','
     << r.f1[static_cast<std::size_t>(Label::non_rumor)] << '\n';
  return os.str();
}

std::string to_csv(const CheckpointSeries& series) {
  std::ostringstream os;
  os.precision(17);
  os << "checkpoint,macro_f1\n";
  for (const auto& p : series.points) os << p.checkpoint.value << ',' << p.report.macro_f1 << '\n';
  return os.str();
}

nlohmann::json to_json(const CheckpointSeries& series) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : series.points) {
    nlohmann::json item = to_json(p.report);
    item["kind"] = std::string(to_string(p.checkpoint.kind));
    item["checkpoint"] = p.checkpoint.value;
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace rpl
