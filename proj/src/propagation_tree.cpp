#include "rpl/propagation_tree.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include "json.hpp"
#include <sstream>
#include <unordered_set>

#include "rpl/error.hpp"
#include "rpl/log.hpp"

namespace rpl {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::rumor ? "rumor" : "non-rumor";
}

Label parse_label(std::string_view text) {
  if (text == "rumor") return Label::rumor;
  if (text == "non-rumor") return Label::non_rumor;
  throw Error(ErrorCode::ParseError, std::string(text), "unknown label");
}

std::string_view to_string(RankStrategy strategy) {
  switch (strategy) {
    case RankStrategy::chronological: return "cho";
    case RankStrategy::inverted: return "inv";
    case RankStrategy::depth_first: return "dep";
    case RankStrategy::breadth_first: return "bre";
  }
  return "cho";
}

RankStrategy parse_strategy(std::string_view text) {
  if (text == "cho") return RankStrategy::chronological;
  if (text == "inv") return RankStrategy::inverted;
  if (text == "dep") return RankStrategy::depth_first;
  if (text == "bre") return RankStrategy::breadth_first;
  throw Error(ErrorCode::BadConfig, std::string(text), "strategy must be one of cho|inv|dep|bre");
}

std::string_view to_string(Relation relation) {
  switch (relation) {
    case Relation::parent_plus: return "PARENT_PLUS";
    case Relation::children_minus: return "CHILDREN_MINUS";
    case Relation::siblings_plus: return "SIBLINGS_PLUS";
    case Relation::siblings_minus: return "SIBLINGS_MINUS";
    case Relation::itself: return "ITSELF";
    case Relation::none: return "NONE";
  }
  return "NONE";
}

std::string_view to_string(Checkpoint::Kind kind) {
  return kind == Checkpoint::Kind::post_count ? "count" : "elapsed";
}

Checkpoint::Kind parse_checkpoint_kind(std::string_view text) {
  if (text == "count") return Checkpoint::Kind::post_count;
  if (text == "elapsed") return Checkpoint::Kind::elapsed_seconds;
  throw Error(ErrorCode::BadConfig, std::string(text), "checkpoint kind must be count|elapsed");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& require(const json& obj, const char* key, const std::string& owner) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::ParseError, owner, std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& owner) {
  const json& v = require(obj, key, owner);
  if (!v.is_string()) {
    throw Error(ErrorCode::ParseError, owner, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::int64_t require_timestamp(const json& obj, const std::string& owner) {
  auto it = obj.find("timestamp");
  if (it == obj.end() || !it->is_number_integer()) {
    throw Error(ErrorCode::BadTimestamp, owner, "timestamp must be integer epoch seconds");
  }
  if (it->is_number_unsigned()) {
    auto u = it->get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) {
      throw Error(ErrorCode::BadTimestamp, owner, "timestamp out of range");
    }
    return static_cast<std::int64_t>(u);
  }
  auto ts = it->get<std::int64_t>();
  if (ts < 0) throw Error(ErrorCode::BadTimestamp, owner, "negative timestamp");
  return ts;
}

void validate_event(const Event& event) {
  std::unordered_set<std::string> ids{event.claim.id};
  for (const Post& p : event.posts) {
    if (!ids.insert(p.id).second) throw Error(ErrorCode::DuplicateId, p.id);
  }
  std::unordered_map<std::string, const Post*> by_id;
  for (const Post& p : event.posts) by_id.emplace(p.id, &p);
  for (const Post& p : event.posts) {
    if (p.parent_id && !ids.contains(*p.parent_id)) {
      throw Error(ErrorCode::UnknownParent, p.id, "parent '" + *p.parent_id + "' not found");
    }
  }
  // Every chain of parents must reach the claim within posts.size() hops.
  for (const Post& p : event.posts) {
    const Post* cur = &p;
    for (std::size_t hops = 0;; ++hops) {
      if (hops > event.posts.size()) throw Error(ErrorCode::CycleDetected, p.id);
      if (!cur->parent_id || *cur->parent_id == event.claim.id) break;
      cur = by_id.at(*cur->parent_id);
      if (cur == &p) throw Error(ErrorCode::CycleDetected, p.id);
    }
  }
}

}  // namespace

Event parse_event(std::string_view json_record) {
  json j;
  try {
    j = json::parse(json_record);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "", e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "", "record is not a JSON object");

  Event event;
  event.id = require_string(j, "id", "<event>");
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(ErrorCode::ParseError, event.id, "label must be a string or null");
    event.label = parse_label(it->get<std::string>());
  }

  auto claim_it = j.find("claim");
  if (claim_it == j.end() || !claim_it->is_object()) throw Error(ErrorCode::MissingClaim, event.id);
  event.claim.id = require_string(*claim_it, "id", event.id);
  event.claim.text = claim_it->value("text", std::string{});
  event.claim.timestamp = require_timestamp(*claim_it, event.claim.id);

  if (auto it = j.find("posts"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::ParseError, event.id, "posts must be an array");
    event.posts.reserve(it->size());
    for (const json& pj : *it) {
      if (!pj.is_object()) throw Error(ErrorCode::ParseError, event.id, "post must be an object");
      Post p;
      p.id = require_string(pj, "id", event.id);
      if (auto par = pj.find("parent"); par != pj.end() && !par->is_null()) {
        if (!par->is_string()) throw Error(ErrorCode::ParseError, p.id, "parent must be a string");
        p.parent_id = par->get<std::string>();
      }
      if (auto t = pj.find("text"); t != pj.end() && !t->is_null()) {
        if (!t->is_string()) throw Error(ErrorCode::ParseError, p.id, "text must be a string");
        p.text = t->get<std::string>();
      }
      p.timestamp = require_timestamp(pj, p.id);
      event.posts.push_back(std::move(p));
    }
  }
  validate_event(event);
  return event;
}

std::string serialize_event(const Event& event) {
  // ordered_json keeps the documented field order in the output.
  nlohmann::ordered_json j;
  j["id"] = event.id;
  j["label"] = event.label ? json(std::string(to_string(*event.label))) : json(nullptr);
  j["claim"] = {{"id", event.claim.id}, {"text", event.claim.text}, {"timestamp", event.claim.timestamp}};
  auto posts = nlohmann::ordered_json::array();
  for (const Post& p : event.posts) {
    nlohmann::ordered_json pj;
    pj["id"] = p.id;
    pj["parent"] = p.parent_id ? nlohmann::ordered_json(*p.parent_id) : nlohmann::ordered_json(nullptr);
    pj["text"] = p.text;
    pj["timestamp"] = p.timestamp;
    posts.push_back(std::move(pj));
  }
  j["posts"] = std::move(posts);
  return j.dump();
}

std::vector<Event> read_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(parse_event(line));
    } catch (const Error& e) {
      throw Error(e.code(), e.subject(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

void write_events(const std::string& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, path, "cannot open for writing");
  for (const Event& e : events) out << serialize_event(e) << '\n';
}

// ---------------------------------------------------------------------------
// Tree

PropagationTree::PropagationTree(const Event& event) {
  validate_event(event);
  const std::size_t n = event.posts.size() + 1;
  ids_.reserve(n);
  timestamps_.reserve(n);
  ids_.push_back(event.claim.id);
  timestamps_.push_back(event.claim.timestamp);
  for (const Post& p : event.posts) {
    ids_.push_back(p.id);
    timestamps_.push_back(p.timestamp);
  }
  for (std::size_t i = 0; i < n; ++i) index_.emplace(ids_[i], i);

  parents_.assign(n, kNoParent);
  children_.assign(n, {});
  for (std::size_t i = 1; i < n; ++i) {
    const Post& p = event.posts[i - 1];
    parents_[i] = p.parent_id ? index_.at(*p.parent_id) : kClaim;
    children_[parents_[i]].push_back(i);
  }
  for (auto& kids : children_) {
    std::sort(kids.begin(), kids.end(), [this](std::size_t a, std::size_t b) { return earlier(a, b); });
  }

  depths_.assign(n, 0);
  std::deque<std::size_t> queue{kClaim};
  while (!queue.empty()) {
    std::size_t node = queue.front();
    queue.pop_front();
    for (std::size_t c : children_[node]) {
      depths_[c] = depths_[node] + 1;
      queue.push_back(c);
      if (timestamps_[c] < timestamps_[node]) {
        logging::warn("post '" + ids_[c] + "' predates its parent '" + ids_[node] + "'");
      }
    }
  }
}

std::size_t PropagationTree::max_depth() const {
  return depths_.empty() ? 0 : *std::max_element(depths_.begin(), depths_.end());
}

std::size_t PropagationTree::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, std::string(id));
  return it->second;
}

bool PropagationTree::contains(std::string_view id) const { return index_.contains(std::string(id)); }

bool PropagationTree::earlier(std::size_t a, std::size_t b) const {
  if (timestamps_[a] != timestamps_[b]) return timestamps_[a] < timestamps_[b];
  return ids_[a] < ids_[b];
}

Relation PropagationTree::relation(std::size_t i, std::size_t j) const {
  if (i == j) return Relation::itself;
  if (parents_[i] == j) return Relation::parent_plus;
  if (parents_[j] == i) return Relation::children_minus;
  if (parents_[i] != kNoParent && parents_[i] == parents_[j]) {
    return earlier(j, i) ? Relation::siblings_plus : Relation::siblings_minus;
  }
  return Relation::none;
}

// ---------------------------------------------------------------------------
// Rankings and positions

std::vector<std::size_t> rank_nodes(const PropagationTree& tree, RankStrategy strategy) {
  std::vector<std::size_t> order;
  order.reserve(tree.post_count());
  switch (strategy) {
    case RankStrategy::chronological:
    case RankStrategy::inverted: {
      for (std::size_t i = 1; i < tree.size(); ++i) order.push_back(i);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tree.earlier(a, b); });
      if (strategy == RankStrategy::inverted) std::reverse(order.begin(), order.end());
      break;
    }
    case RankStrategy::depth_first: {
      std::vector<std::size_t> stack;
      const auto& roots = tree.children(PropagationTree::kClaim);
      stack.assign(roots.rbegin(), roots.rend());
      while (!stack.empty()) {
        std::size_t node = stack.back();
        stack.pop_back();
        order.push_back(node);
        const auto& kids = tree.children(node);
        stack.insert(stack.end(), kids.rbegin(), kids.rend());
      }
      break;
    }
    case RankStrategy::breadth_first: {
      const auto& roots = tree.children(PropagationTree::kClaim);
      std::deque<std::size_t> queue(roots.begin(), roots.end());
      while (!queue.empty()) {
        std::size_t node = queue.front();
        queue.pop_front();
        order.push_back(node);
        const auto& kids = tree.children(node);
        queue.insert(queue.end(), kids.begin(), kids.end());
      }
      break;
    }
  }
  return order;
}

RankedThread rank_responses(const PropagationTree& tree, RankStrategy strategy) {
  RankedThread thread;
  thread.strategy = strategy;
  for (std::size_t node : rank_nodes(tree, strategy)) thread.order.push_back(tree.id(node));
  return thread;
}

std::map<std::string, std::size_t> absolute_positions(const PropagationTree& tree) {
  std::map<std::string, std::size_t> depths;
  for (std::size_t i = 1; i < tree.size(); ++i) depths.emplace(tree.id(i), tree.depth(i));
  return depths;
}

Relation relative_relation(const PropagationTree& tree, std::string_view i, std::string_view j) {
  return tree.relation(tree.index_of(i), tree.index_of(j));
}

std::vector<Relation> relation_matrix(const PropagationTree& tree) {
  const std::size_t n = tree.size();
  std::vector<Relation> rel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) rel[i * n + j] = tree.relation(i, j);
  }
  return rel;
}

// ---------------------------------------------------------------------------
// Early-detection filtering

Event filter_by_checkpoint(const Event& event, const Checkpoint& checkpoint) {
  PropagationTree tree(event);
  std::vector<bool> keep(tree.size(), false);
  keep[PropagationTree::kClaim] = true;
  const std::int64_t value = std::max<std::int64_t>(checkpoint.value, 0);
  if (checkpoint.kind == Checkpoint::Kind::post_count) {
    auto chrono = rank_nodes(tree, RankStrategy::chronological);
    const auto limit = std::min<std::size_t>(chrono.size(), static_cast<std::size_t>(value));
    for (std::size_t k = 0; k < limit; ++k) keep[chrono[k]] = true;
  } else {
    for (std::size_t i = 1; i < tree.size(); ++i) {
      keep[i] = tree.timestamp(i) - event.claim.timestamp <= value;
    }
  }

  Event out;
  out.id = event.id;
  out.label = event.label;
  out.claim = event.claim;
  for (std::size_t i = 1; i < tree.size(); ++i) {
    if (!keep[i]) continue;
    Post p = event.posts[i - 1];
    if (!keep[tree.parent(i)]) {
      std::size_t anc = tree.parent(i);
      while (!keep[anc]) anc = tree.parent(anc);
      p.parent_id = tree.id(anc);
    }
    out.posts.push_back(std::move(p));
  }
  return out;
}

DatasetStats dataset_stats(const std::vector<Event>& events) {
  DatasetStats stats;
  if (events.empty()) return stats;
  double span_hours = 0.0;
  double depth = 0.0;
  for (const Event& e : events) {
    ++stats.events;
    stats.nodes += 1 + e.posts.size();
    if (e.label == Label::rumor) ++stats.rumors;
    if (e.label == Label::non_rumor) ++stats.non_rumors;
    std::int64_t last = e.claim.timestamp;
    for (const Post& p : e.posts) last = std::max(last, p.timestamp);
    span_hours += static_cast<double>(last - e.claim.timestamp) / 3600.0;
    depth += static_cast<double>(PropagationTree(e).max_depth());
  }
  stats.avg_time_span_hours = span_hours / static_cast<double>(stats.events);
  stats.avg_depth = depth / static_cast<double>(stats.events);
  return stats;
}

}  // namespace rpl
