#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpl/propagation_tree.hpp"

namespace rpl {

// Generated datasets that stand in for real social-media corpora.
//   lexical    - rumor threads carry deny-signal tokens, non-rumor threads
//                support tokens; claims are neutral.
//   structural - every post carries one stance token and stance counts are
//                identical across classes; rumor events have disagreeing
//                sibling pairs, non-rumor events agreeing ones.
//   null       - lexical-style content with labels drawn independently.
struct SynthSpec {
  enum class Mode { lexical, structural, null };
  Mode mode = Mode::lexical;
  std::size_t events_per_class = 100;
  std::size_t min_posts = 3;
  std::size_t max_posts = 10;
  std::size_t vocab_size = 200;  // neutral filler words
  std::uint64_t seed = 1;
  // Lexical/null: when > 0, only the `signal_window` earliest posts carry
  // signal tokens (each of them does); 0 spreads signal over the thread.
  std::size_t signal_window = 0;
  std::string id_prefix = "ev";

  void validate() const;
};

SynthSpec::Mode parse_synth_mode(const std::string& text);
std::string to_string(SynthSpec::Mode mode);

const std::vector<std::string>& deny_tokens();
const std::vector<std::string>& support_tokens();
const std::vector<std::string>& stance_tokens();  // {agree, dispute}

// Deterministic for a given spec (including seed). Classes are balanced and
// event order is a seeded shuffle.
std::vector<Event> generate_synthetic(const SynthSpec& spec);

}  // namespace rpl
