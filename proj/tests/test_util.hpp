#pragma once

#include <random>
#include <string>
#include <vector>

#include "rpl/propagation_tree.hpp"

namespace rpl::testing {

// The six-post example thread: c -> x1 -> x2 -> x5, c -> x3 -> x4 -> x6,
// with timestamps following the post numbers.
inline Event example_event() {
  Event e;
  e.id = "example";
  e.label = Label::rumor;
  e.claim = {"c", std::nullopt, "the claim under review", 0};
  e.posts = {
      {"x1", "c", "first reply", 10},       {"x2", "x1", "reply to x1", 20},
      {"x3", std::nullopt, "second reply", 30}, {"x4", "x3", "reply to x3", 40},
      {"x5", "x2", "deep reply", 50},       {"x6", "x4", "deep reply two", 60},
  };
  return e;
}

// Random valid event with n posts; parents are drawn among earlier posts
// (or the claim) so the structure is always a tree, while timestamps are
// drawn independently so children can predate parents and ties happen.
inline Event random_event(std::mt19937_64& rng, std::size_t n, const std::string& id = "r") {
  Event e;
  e.id = id;
  e.label = (rng() & 1) ? Label::rumor : Label::non_rumor;
  e.claim = {id + "-c", std::nullopt, "claim words here", 1000};
  std::uniform_int_distribution<std::int64_t> ts(1000, 1040);
  std::vector<std::string> ids{e.claim.id};
  for (std::size_t i = 0; i < n; ++i) {
    Post p;
    p.id = id + "-" + std::to_string(i);
    const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng);
    if (parent > 0 || (rng() & 1)) p.parent_id = ids[parent];
    p.text = "post " + std::to_string(rng() % 50) + " text";
    p.timestamp = ts(rng);
    ids.push_back(p.id);
    e.posts.push_back(std::move(p));
  }
  // Shuffle post order so file order carries no structure.
  std::shuffle(e.posts.begin(), e.posts.end(), rng);
  return e;
}

}  // namespace rpl::testing
