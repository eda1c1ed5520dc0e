#include "rpl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "rpl/error.hpp"

namespace rpl {

namespace {

constexpr std::int64_t kEpochBase = 1'600'000'000;

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string filler(Rng& rng, const SynthSpec& spec) { return "w" + std::to_string(uniform(rng, 0, spec.vocab_size - 1)); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string neutral_text(Rng& rng, const SynthSpec& spec, std::size_t lo, std::size_t hi) {
  std::vector<std::string> words;
  const std::size_t n = uniform(rng, lo, hi);
  for (std::size_t i = 0; i < n; ++i) words.push_back(filler(rng, spec));
  return join(words);
}

std::string with_token(Rng& rng, const SynthSpec& spec, const std::string& token, std::size_t fillers) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < fillers; ++i) words.push_back(filler(rng, spec));
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform(rng, 0, words.size())), token);
  return join(words);
}

std::string pick(Rng& rng, const std::vector<std::string>& tokens) { return tokens[uniform(rng, 0, tokens.size() - 1)]; }

std::string event_id(const SynthSpec& spec, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return spec.id_prefix + buf;
}

Event base_event(const SynthSpec& spec, std::size_t index, Label label, Rng& rng) {
  Event e;
  e.id = event_id(spec, index);
  e.label = label;
  e.claim.id = e.id + "-c";
  e.claim.text = neutral_text(rng, spec, 5, 8);
  e.claim.timestamp = kEpochBase + static_cast<std::int64_t>(index) * 100'000;
  return e;
}

// Random reply tree, branching factor 1-3, timestamps after the parent.
void grow_tree(Event& e, std::size_t posts, Rng& rng) {
  std::vector<std::size_t> child_count(posts + 1, 0);
  std::vector<std::int64_t> ts{e.claim.timestamp};
  for (std::size_t i = 1; i <= posts; ++i) {
    std::vector<std::size_t> open;
    for (std::size_t n = 0; n < i; ++n)
      if (child_count[n] < 3) open.push_back(n);
    const std::size_t parent = open[uniform(rng, 0, open.size() - 1)];
    ++child_count[parent];
    Post p;
    p.id = e.id + "-p" + std::to_string(i);
    if (parent != 0) p.parent_id = e.posts[parent - 1].id;
    p.timestamp = ts[parent] + static_cast<std::int64_t>(uniform(rng, 30, 3600));
    ts.push_back(p.timestamp);
    e.posts.push_back(std::move(p));
  }
}

Event lexical_event(const SynthSpec& spec, std::size_t index, Label label, Rng& rng) {
  Event e = base_event(spec, index, label, rng);
  grow_tree(e, uniform(rng, spec.min_posts, spec.max_posts), rng);

  auto signal_for = [&](Rng& r) -> const std::vector<std::string>& {
    if (spec.mode == SynthSpec::Mode::null) return uniform(r, 0, 1) ? deny_tokens() : support_tokens();
    return label == Label::rumor ? deny_tokens() : support_tokens();
  };

  std::vector<bool> carries(e.posts.size(), false);
  if (spec.signal_window > 0) {
    std::vector<std::size_t> chrono(e.posts.size());
    for (std::size_t i = 0; i < chrono.size(); ++i) chrono[i] = i;
    std::sort(chrono.begin(), chrono.end(), [&e](std::size_t a, std::size_t b) {
      const Post& pa = e.posts[a];
      const Post& pb = e.posts[b];
      return pa.timestamp != pb.timestamp ? pa.timestamp < pb.timestamp : pa.id < pb.id;
    });
    for (std::size_t k = 0; k < std::min(spec.signal_window, chrono.size()); ++k) carries[chrono[k]] = true;
  } else {
    for (std::size_t i = 0; i < carries.size(); ++i) carries[i] = uniform(rng, 0, 1) == 1;
    if (!carries.empty() && std::none_of(carries.begin(), carries.end(), [](bool b) { return b; })) carries[0] = true;
  }
  for (std::size_t i = 0; i < e.posts.size(); ++i) {
    e.posts[i].text = carries[i] ? with_token(rng, spec, pick(rng, signal_for(rng)), uniform(rng, 2, 5))
                                 : neutral_text(rng, spec, 3, 6);
  }
  return e;
}

Event structural_event(const SynthSpec& spec, std::size_t index, Label label, Rng& rng) {
  Event e = base_event(spec, index, label, rng);
  const auto& stance = stance_tokens();
  const std::size_t max_pairs = std::max<std::size_t>(1, spec.max_posts / 6);
  const std::size_t groups = 2 * uniform(rng, 1, max_pairs);  // even number of sibling pairs

  // First-level stances: half agree, half dispute, independent of the label.
  std::vector<std::size_t> top(groups);
  for (std::size_t g = 0; g < groups; ++g) top[g] = g % 2;
  std::shuffle(top.begin(), top.end(), rng);
  // Sibling-pair stances. Rumor: each pair disagrees. Non-rumor: each pair
  // agrees, half the pairs on each stance. Either way every event holds
  // exactly `groups` of each stance token at depth 2.
  std::vector<std::array<std::size_t, 2>> pairs(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    if (label == Label::rumor) {
      const std::size_t first = uniform(rng, 0, 1);
      pairs[g] = {first, 1 - first};
    } else {
      pairs[g] = {g % 2, g % 2};
    }
  }
  if (label == Label::non_rumor) std::shuffle(pairs.begin(), pairs.end(), rng);

  std::size_t next = 1;
  auto make_post = [&](const std::optional<std::string>& parent, std::int64_t ts, std::size_t s) {
    Post p;
    p.id = e.id + "-p" + std::to_string(next++);
    p.parent_id = parent;
    p.timestamp = ts;
    p.text = with_token(rng, spec, stance[s], uniform(rng, 1, 2));
    return p;
  };
  std::vector<Post> firsts;
  for (std::size_t g = 0; g < groups; ++g) {
    firsts.push_back(make_post(std::nullopt, e.claim.timestamp + static_cast<std::int64_t>(uniform(rng, 1, 600)), top[g]));
  }
  for (std::size_t g = 0; g < groups; ++g) {
    e.posts.push_back(firsts[g]);
    for (std::size_t s : pairs[g]) {
      e.posts.push_back(make_post(firsts[g].id, firsts[g].timestamp + static_cast<std::int64_t>(uniform(rng, 1, 1800)), s));
    }
  }
  return e;
}

}  // namespace

void SynthSpec::validate() const {
  if (events_per_class == 0) throw Error(ErrorCode::BadConfig, "events_per_class", "must be positive");
  if (vocab_size == 0) throw Error(ErrorCode::BadConfig, "vocab_size", "must be positive");
  if (min_posts > max_posts) throw Error(ErrorCode::BadConfig, "min_posts", "must not exceed max_posts");
  if (mode != Mode::structural && max_posts == 0) throw Error(ErrorCode::BadConfig, "max_posts", "must be positive");
}

SynthSpec::Mode parse_synth_mode(const std::string& text) {
  if (text == "lexical") return SynthSpec::Mode::lexical;
  if (text == "structural") return SynthSpec::Mode::structural;
  if (text == "null") return SynthSpec::Mode::null;
  throw Error(ErrorCode::BadConfig, text, "mode must be lexical|structural|null");
}

std::string to_string(SynthSpec::Mode mode) {
  switch (mode) {
    case SynthSpec::Mode::lexical: return "lexical";
    case SynthSpec::Mode::structural: return "structural";
    case SynthSpec::Mode::null: return "null";
  }
  return "lexical";
}

const std::vector<std::string>& deny_tokens() {
  static const std::vector<std::string> tokens{"hoax", "fabricated", "debunked", "misleading", "bogus", "doubtful"};
  return tokens;
}

const std::vector<std::string>& support_tokens() {
  static const std::vector<std::string> tokens{"confirmed", "verified", "official", "accurate", "legit", "corroborated"};
  return tokens;
}

const std::vector<std::string>& stance_tokens() {
  static const std::vector<std::string> tokens{"agree", "dispute"};
  return tokens;
}

std::vector<Event> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Label> labels;
  for (std::size_t i = 0; i < spec.events_per_class; ++i) {
    labels.push_back(Label::non_rumor);
    labels.push_back(Label::rumor);
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<Event> events;
  events.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    events.push_back(spec.mode == SynthSpec::Mode::structural ? structural_event(spec, i, labels[i], rng)
                                                              : lexical_event(spec, i, labels[i], rng));
  }
  return events;
}

}  // namespace rpl
