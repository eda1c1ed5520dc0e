#include "rpl/vocab.hpp"

#include <array>
#include <fstream>

#include "rpl/error.hpp"

namespace rpl {

namespace {

constexpr std::array<std::string_view, Vocab::kReserved> kReservedTokens = {"[PAD]", "[UNK]", "[MASK]", "[SEP]"};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      bool matched = false;
      for (std::string_view special : kReservedTokens) {
        if (text.substr(i, special.size()) == special) {
          out.emplace_back(special);
          i += special.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (is_word_byte(c)) {
      std::string word;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
        const auto b = static_cast<unsigned char>(text[i]);
        word.push_back(b < 0x80 ? static_cast<char>(std::tolower(b)) : static_cast<char>(b));
        ++i;
      }
      out.push_back(std::move(word));
      continue;
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return out;
}

Vocab::Vocab() {
  for (std::string_view t : kReservedTokens) add(std::string(t));
}

std::size_t Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

std::vector<std::size_t> Vocab::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const std::string& t : split_tokens(text)) ids.push_back(id(t));
  return ids;
}

Vocab Vocab::build(const std::vector<Event>& events, std::span<const std::string> extra) {
  Vocab vocab;
  auto add_text = [&vocab](std::string_view text) {
    for (const std::string& t : split_tokens(text)) vocab.add(t);
  };
  for (const Event& e : events) {
    add_text(e.claim.text);
    for (const Post& p : e.posts) add_text(p.text);
  }
  for (const std::string& t : extra) add_text(t);
  return vocab;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kReserved) throw Error(ErrorCode::BadConfig, "vocab", "missing reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw Error(ErrorCode::BadConfig, tokens[i], "reserved token expected at id " + std::to_string(i));
    }
  }
  Vocab vocab;
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (vocab.add(tokens[i]) != i) throw Error(ErrorCode::BadConfig, tokens[i], "duplicate vocab token");
  }
  return vocab;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(tokens);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, path, "cannot open for writing");
  for (const std::string& t : tokens_) out << t << '\n';
}

}  // namespace rpl
