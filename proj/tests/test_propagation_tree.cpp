#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "rpl/error.hpp"
#include "rpl/log.hpp"
#include "rpl/propagation_tree.hpp"
#include "test_util.hpp"

using namespace rpl;
using rpl::testing::example_event;
using rpl::testing::random_event;

namespace {

std::vector<std::string> ranked(const Event& e, RankStrategy s) { return rank_responses(PropagationTree(e), s).order; }

ErrorCode code_of(const std::string& line) {
  try {
    PropagationTree tree(parse_event(line));
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << line;
  return ErrorCode::IoError;
}

struct Quiet {
  Quiet() { logging::set_quiet(true); }
  ~Quiet() { logging::set_quiet(false); }
};

}  // namespace

TEST(Ranking, ExampleTreeAllStrategies) {
  const Event e = example_event();
  using V = std::vector<std::string>;
  EXPECT_EQ(ranked(e, RankStrategy::depth_first), (V{"x1", "x2", "x5", "x3", "x4", "x6"}));
  EXPECT_EQ(ranked(e, RankStrategy::breadth_first), (V{"x1", "x3", "x2", "x4", "x5", "x6"}));
  EXPECT_EQ(ranked(e, RankStrategy::chronological), (V{"x1", "x2", "x3", "x4", "x5", "x6"}));
  EXPECT_EQ(ranked(e, RankStrategy::inverted), (V{"x6", "x5", "x4", "x3", "x2", "x1"}));
}

TEST(Ranking, FileOrderDoesNotMatter) {
  Event e = example_event();
  std::reverse(e.posts.begin(), e.posts.end());
  EXPECT_EQ(ranked(e, RankStrategy::depth_first), ranked(example_event(), RankStrategy::depth_first));
  EXPECT_EQ(ranked(e, RankStrategy::breadth_first), ranked(example_event(), RankStrategy::breadth_first));
}

TEST(Ranking, TimestampTiesBreakOnId) {
  Event e;
  e.id = "t";
  e.claim = {"c", std::nullopt, "", 0};
  e.posts = {{"b", std::nullopt, "", 5}, {"a", std::nullopt, "", 5}, {"c1", "b", "", 1}};
  Quiet q;
  using V = std::vector<std::string>;
  EXPECT_EQ(ranked(e, RankStrategy::breadth_first), (V{"a", "b", "c1"}));
  EXPECT_EQ(ranked(e, RankStrategy::depth_first), (V{"a", "b", "c1"}));
  EXPECT_EQ(ranked(e, RankStrategy::chronological), (V{"c1", "a", "b"}));
}

TEST(Ranking, EmptyThread) {
  Event e;
  e.id = "solo";
  e.claim = {"c", std::nullopt, "alone", 3};
  for (auto s : {RankStrategy::chronological, RankStrategy::inverted, RankStrategy::depth_first,
                 RankStrategy::breadth_first}) {
    EXPECT_TRUE(ranked(e, s).empty());
  }
}

// Structural properties on random trees: every strategy is a permutation
// of the posts; breadth-first depth never decreases; depth-first visits a
// parent before its children and keeps subtrees contiguous; chronological
// is sorted by (timestamp, id) and inverted is its reverse.
TEST(Ranking, PropertiesOnRandomTrees) {
  Quiet q;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Event e = random_event(rng, 1 + rng() % 25);
    const PropagationTree tree(e);
    std::vector<std::string> all;
    for (const Post& p : e.posts) all.push_back(p.id);
    std::sort(all.begin(), all.end());

    for (auto s : {RankStrategy::chronological, RankStrategy::inverted, RankStrategy::depth_first,
                   RankStrategy::breadth_first}) {
      auto order = ranked(e, s);
      std::sort(order.begin(), order.end());
      ASSERT_EQ(order, all);
    }

    const auto bre = rank_nodes(tree, RankStrategy::breadth_first);
    for (std::size_t k = 1; k < bre.size(); ++k) ASSERT_LE(tree.depth(bre[k - 1]), tree.depth(bre[k]));

    const auto dep = rank_nodes(tree, RankStrategy::depth_first);
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t k = 0; k < dep.size(); ++k) pos[dep[k]] = k;
    for (std::size_t node : dep) {
      const std::size_t parent = tree.parent(node);
      if (parent != PropagationTree::kClaim) {
        ASSERT_LT(pos[parent], pos[node]);
        // Everything between the parent and the node lies in the parent's subtree.
        for (std::size_t k = pos[parent] + 1; k < pos[node]; ++k) {
          std::size_t a = dep[k];
          while (a != PropagationTree::kClaim && a != parent) a = tree.parent(a);
          ASSERT_EQ(a, parent);
        }
      }
    }

    auto cho = ranked(e, RankStrategy::chronological);
    std::map<std::string, std::int64_t> ts;
    for (const Post& p : e.posts) ts[p.id] = p.timestamp;
    for (std::size_t k = 1; k < cho.size(); ++k) {
      ASSERT_TRUE(std::make_pair(ts[cho[k - 1]], cho[k - 1]) < std::make_pair(ts[cho[k]], cho[k]));
    }
    auto inv = ranked(e, RankStrategy::inverted);
    std::reverse(inv.begin(), inv.end());
    ASSERT_EQ(inv, cho);
  }
}

TEST(Positions, ExampleTreeDepths) {
  const auto depths = absolute_positions(PropagationTree(example_event()));
  const std::map<std::string, std::size_t> expected{{"x1", 1}, {"x2", 2}, {"x3", 1},
                                                    {"x4", 2}, {"x5", 3}, {"x6", 3}};
  EXPECT_EQ(depths, expected);
}

TEST(Positions, ExampleTreeRelations) {
  const PropagationTree tree(example_event());
  EXPECT_EQ(relative_relation(tree, "x2", "x1"), Relation::parent_plus);
  EXPECT_EQ(relative_relation(tree, "x1", "x2"), Relation::children_minus);
  EXPECT_EQ(relative_relation(tree, "x3", "x1"), Relation::siblings_plus);
  EXPECT_EQ(relative_relation(tree, "x1", "x3"), Relation::siblings_minus);
  EXPECT_EQ(relative_relation(tree, "x4", "x4"), Relation::itself);
  EXPECT_EQ(relative_relation(tree, "x5", "x1"), Relation::none);
  EXPECT_EQ(relative_relation(tree, "x1", "c"), Relation::parent_plus);
  EXPECT_EQ(relative_relation(tree, "c", "x3"), Relation::children_minus);
  EXPECT_THROW(relative_relation(tree, "x1", "nope"), Error);
}

// Independent enumerator working directly on the raw records.
TEST(Positions, RelationMatchesBruteForce) {
  Quiet q;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Event e = random_event(rng, rng() % 30);
    std::map<std::string, std::string> parent;
    std::map<std::string, std::int64_t> ts{{e.claim.id, e.claim.timestamp}};
    std::vector<std::string> ids{e.claim.id};
    for (const Post& p : e.posts) {
      parent[p.id] = p.parent_id.value_or(e.claim.id);
      ts[p.id] = p.timestamp;
      ids.push_back(p.id);
    }
    auto brute = [&](const std::string& a, const std::string& b) {
      if (a == b) return Relation::itself;
      if (parent.count(a) && parent[a] == b) return Relation::parent_plus;
      if (parent.count(b) && parent[b] == a) return Relation::children_minus;
      if (parent.count(a) && parent.count(b) && parent[a] == parent[b]) {
        return std::make_pair(ts[b], b) < std::make_pair(ts[a], a) ? Relation::siblings_plus
                                                                    : Relation::siblings_minus;
      }
      return Relation::none;
    };
    const PropagationTree tree(e);
    const auto matrix = relation_matrix(tree);
    for (const auto& a : ids) {
      for (const auto& b : ids) {
        ASSERT_EQ(relative_relation(tree, a, b), brute(a, b)) << a << " " << b;
        ASSERT_EQ(matrix[tree.index_of(a) * tree.size() + tree.index_of(b)], brute(a, b));
      }
    }
  }
}

TEST(Parsing, RoundTripRandomEvents) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Event e = random_event(rng, rng() % 12, "ev" + std::to_string(trial));
    if (trial % 5 == 0) e.label.reset();
    const std::string line = serialize_event(e);
    EXPECT_EQ(parse_event(line), e);
    EXPECT_EQ(serialize_event(parse_event(line)), line);
  }
}

TEST(Parsing, ParentMayNameTheClaim) {
  const Event e = parse_event(
      R"({"id":"e","claim":{"id":"c","text":"t","timestamp":1},"posts":[{"id":"p","parent":"c","text":"r","timestamp":2}]})");
  EXPECT_EQ(PropagationTree(e).parent(1), PropagationTree::kClaim);
  EXPECT_FALSE(e.label.has_value());
}

TEST(Parsing, Errors) {
  EXPECT_EQ(code_of("{not json"), ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"id":"e","posts":[]})"), ErrorCode::MissingClaim);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":"x"}})"), ErrorCode::BadTimestamp);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":-5}})"), ErrorCode::BadTimestamp);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1.5}})"), ErrorCode::BadTimestamp);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1},"posts":[{"id":"p","timestamp":2},{"id":"p","timestamp":3}]})"),
            ErrorCode::DuplicateId);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1},"posts":[{"id":"c","timestamp":2}]})"),
            ErrorCode::DuplicateId);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1},"posts":[{"id":"p","parent":"q","timestamp":2}]})"),
            ErrorCode::UnknownParent);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1},"posts":[{"id":"a","parent":"b","timestamp":2},{"id":"b","parent":"a","timestamp":3}]})"),
            ErrorCode::CycleDetected);
  EXPECT_EQ(code_of(R"({"id":"e","claim":{"id":"c","timestamp":1},"posts":[{"id":"a","parent":"a","timestamp":2}]})"),
            ErrorCode::CycleDetected);
  EXPECT_EQ(code_of(R"({"id":"e","label":"maybe","claim":{"id":"c","timestamp":1}})"), ErrorCode::ParseError);
}

TEST(Parsing, ChildBeforeParentWarnsButLoads) {
  Quiet q;
  const std::size_t before = logging::warning_count();
  const Event e = parse_event(
      R"({"id":"e","claim":{"id":"c","timestamp":10},"posts":[{"id":"a","timestamp":20},{"id":"b","parent":"a","timestamp":15}]})");
  PropagationTree tree(e);
  EXPECT_GT(logging::warning_count(), before);
  EXPECT_EQ(tree.depth(tree.index_of("b")), 2u);
}

TEST(Parsing, ReadEventsReportsLine) {
  const auto path = std::filesystem::temp_directory_path() / "rpl_read_events.jsonl";
  {
    std::ofstream out(path);
    out << serialize_event(example_event()) << "\n\n" << "{\"id\":\"bad\"}\n";
  }
  try {
    read_events(path.string());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingClaim);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_events("/nonexistent/file.jsonl"), Error);
  std::filesystem::remove(path);
}

TEST(Checkpoints, CountZeroIsClaimOnly) {
  const Event e = filter_by_checkpoint(example_event(), {Checkpoint::Kind::post_count, 0});
  EXPECT_TRUE(e.posts.empty());
  EXPECT_EQ(e.claim, example_event().claim);
}

TEST(Checkpoints, BeyondEverythingIsIdentity) {
  const Event full = example_event();
  EXPECT_EQ(filter_by_checkpoint(full, {Checkpoint::Kind::post_count, 100}), full);
  EXPECT_EQ(filter_by_checkpoint(full, {Checkpoint::Kind::elapsed_seconds, 1000}), full);
}

TEST(Checkpoints, ElapsedUsesClaimAsOrigin) {
  const Event e = filter_by_checkpoint(example_event(), {Checkpoint::Kind::elapsed_seconds, 30});
  std::vector<std::string> ids;
  for (const Post& p : e.posts) ids.push_back(p.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"x1", "x2", "x3"}));
}

TEST(Checkpoints, OrphansMoveToNearestKeptAncestor) {
  Quiet q;
  // b replies to a but predates it, so at count 1 only b is visible and
  // hangs off the claim.
  const Event e = parse_event(
      R"({"id":"e","claim":{"id":"c","timestamp":0},"posts":[{"id":"a","timestamp":20},{"id":"b","parent":"a","timestamp":10},{"id":"d","parent":"b","timestamp":30}]})");
  const Event cut = filter_by_checkpoint(e, {Checkpoint::Kind::post_count, 1});
  ASSERT_EQ(cut.posts.size(), 1u);
  EXPECT_EQ(cut.posts[0].id, "b");
  EXPECT_EQ(cut.posts[0].parent_id.value_or("c"), "c");
  const Event cut2 = filter_by_checkpoint(e, {Checkpoint::Kind::elapsed_seconds, 10});
  EXPECT_EQ(PropagationTree(cut2).depth(1), 1u);
}

TEST(Checkpoints, ContentIsNested) {
  Quiet q;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Event e = random_event(rng, rng() % 20);
    for (auto kind : {Checkpoint::Kind::post_count, Checkpoint::Kind::elapsed_seconds}) {
      std::set<std::string> prev;
      for (std::int64_t v = 0; v <= 60; v += 3) {
        const Event cut = filter_by_checkpoint(e, {kind, v});
        std::set<std::string> now;
        for (const Post& p : cut.posts) now.insert(p.id);
        ASSERT_TRUE(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
        prev = std::move(now);
      }
    }
  }
}

TEST(Stats, ExampleTree) {
  Event other = example_event();
  other.id = "other";
  other.label = Label::non_rumor;
  other.posts.resize(1);
  const DatasetStats s = dataset_stats({example_event(), other});
  EXPECT_EQ(s.events, 2u);
  EXPECT_EQ(s.nodes, 7u + 2u);
  EXPECT_EQ(s.rumors, 1u);
  EXPECT_EQ(s.non_rumors, 1u);
  EXPECT_DOUBLE_EQ(s.avg_depth, (3.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(s.avg_time_span_hours, (60.0 / 3600.0 + 10.0 / 3600.0) / 2.0);
}

TEST(Parsing, StrategyAndKindNames) {
  EXPECT_EQ(parse_strategy("dep"), RankStrategy::depth_first);
  EXPECT_EQ(to_string(RankStrategy::breadth_first), "bre");
  EXPECT_THROW(parse_strategy("dfs"), Error);
  EXPECT_EQ(parse_checkpoint_kind("elapsed"), Checkpoint::Kind::elapsed_seconds);
  EXPECT_THROW(parse_checkpoint_kind("hours"), Error);
  EXPECT_EQ(parse_label("non-rumor"), Label::non_rumor);
}
