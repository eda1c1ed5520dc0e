#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rpl {

enum class Label : std::uint8_t { non_rumor = 0, rumor = 1 };
inline constexpr std::size_t kNumClasses = 2;

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct Post {
  std::string id;
  // Absent means the post replies directly to the claim.
  std::optional<std::string> parent_id;
  std::string text;
  std::int64_t timestamp = 0;

  bool operator==(const Post&) const = default;
};

struct Event {
  std::string id;
  std::optional<Label> label;
  Post claim;
  std::vector<Post> posts;

  bool operator==(const Event&) const = default;
};

// One line of the event JSONL format. Throws rpl::Error on malformed or
// structurally invalid records (DuplicateId, UnknownParent, CycleDetected,
// MissingClaim, BadTimestamp, ParseError).
Event parse_event(std::string_view json_record);
std::string serialize_event(const Event& event);

// Reads a whole JSONL file; errors are rethrown with the line number in the
// message and the event/post id as subject.
std::vector<Event> read_events(const std::string& path);
void write_events(const std::string& path, const std::vector<Event>& events);

enum class RankStrategy : std::uint8_t { chronological, inverted, depth_first, breadth_first };

std::string_view to_string(RankStrategy strategy);
RankStrategy parse_strategy(std::string_view text);  // cho|inv|dep|bre

enum class Relation : std::uint8_t {
  parent_plus = 0,
  children_minus = 1,
  siblings_plus = 2,
  siblings_minus = 3,
  itself = 4,
  none = 5,
};
inline constexpr std::size_t kNumRelations = 6;

std::string_view to_string(Relation relation);

// Index-based view of an event's reply tree. Node 0 is the claim, node i>0
// is event.posts[i-1]. Children are ordered by (timestamp, id).
class PropagationTree {
 public:
  static constexpr std::size_t kClaim = 0;
  static constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

  explicit PropagationTree(const Event& event);

  std::size_t size() const { return ids_.size(); }
  std::size_t post_count() const { return ids_.size() - 1; }

  const std::string& id(std::size_t node) const { return ids_[node]; }
  std::int64_t timestamp(std::size_t node) const { return timestamps_[node]; }
  std::size_t parent(std::size_t node) const { return parents_[node]; }
  std::size_t depth(std::size_t node) const { return depths_[node]; }
  const std::vector<std::size_t>& children(std::size_t node) const { return children_[node]; }
  std::size_t max_depth() const;

  // Throws Error(UnknownNode) for ids not in the tree.
  std::size_t index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  // Strict (timestamp, id) ordering used for siblings and chronology.
  bool earlier(std::size_t a, std::size_t b) const;

  Relation relation(std::size_t i, std::size_t j) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::int64_t> timestamps_;
  std::vector<std::size_t> parents_;
  std::vector<std::size_t> depths_;
  std::vector<std::vector<std::size_t>> children_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TruncationPoint {
  std::string post_id;
  std::size_t token_offset = 0;  // tokens of that post kept
  bool operator==(const TruncationPoint&) const = default;
};

struct RankedThread {
  RankStrategy strategy = RankStrategy::chronological;
  std::vector<std::string> order;
  std::optional<TruncationPoint> truncated_at;
};

RankedThread rank_responses(const PropagationTree& tree, RankStrategy strategy);
// Same ranking as node indices (claim excluded).
std::vector<std::size_t> rank_nodes(const PropagationTree& tree, RankStrategy strategy);

// Post id -> depth; the claim is implicitly 0 and not listed.
std::map<std::string, std::size_t> absolute_positions(const PropagationTree& tree);

// rel(i, j) for node ids (claim id allowed). Throws Error(UnknownNode).
Relation relative_relation(const PropagationTree& tree, std::string_view i, std::string_view j);

// Dense [size x size] relation matrix over node indices.
std::vector<Relation> relation_matrix(const PropagationTree& tree);

struct Checkpoint {
  enum class Kind : std::uint8_t { post_count, elapsed_seconds };
  Kind kind = Kind::post_count;
  std::int64_t value = 0;
};

std::string_view to_string(Checkpoint::Kind kind);
Checkpoint::Kind parse_checkpoint_kind(std::string_view text);  // count|elapsed

Event filter_by_checkpoint(const Event& event, const Checkpoint& checkpoint);

struct DatasetStats {
  std::size_t events = 0;
  std::size_t nodes = 0;  // claims + posts
  std::size_t rumors = 0;
  std::size_t non_rumors = 0;
  double avg_time_span_hours = 0.0;
  double avg_depth = 0.0;  // mean over trees of the maximum depth
};

DatasetStats dataset_stats(const std::vector<Event>& events);

}  // namespace rpl
