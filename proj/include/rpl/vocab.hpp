#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rpl/propagation_tree.hpp"

namespace rpl {

// Lowercased split on whitespace and ASCII punctuation; each punctuation
// character is its own token. The reserved tokens [PAD] [UNK] [MASK] [SEP]
// are recognised verbatim. Bytes >= 0x80 count as word characters so UTF-8
// words stay whole.
std::vector<std::string> split_tokens(std::string_view text);

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kMask = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();

  // Reserved tokens, then every token of the events' claims and posts, then
  // `extra` (template words, label words, synthetic signal tokens) in order
  // of first appearance.
  static Vocab build(const std::vector<Event>& events, std::span<const std::string> extra = {});

  // One token per line, line number = id, reserved tokens first.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  std::size_t add(const std::string& token);
  std::size_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace rpl
