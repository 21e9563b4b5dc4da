#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "diffstr/common.hpp"

namespace diffstr {

/// A noisy or clean token state: fixed-length array of ids in [0, K).
using TokenSeq = std::vector<int>;

/// Ordered set of recognizable characters. Ids follow the stored order.
class Charset {
 public:
  explicit Charset(std::string chars) : chars_(std::move(chars)) {
    lut_.fill(-1);
    for (int i = 0; i < static_cast<int>(chars_.size()); ++i) {
      const auto byte = static_cast<unsigned char>(chars_[i]);
      if (lut_[byte] != -1)
        throw ConfigError("duplicate character in charset: '" +
                          std::string(1, chars_[i]) + "'");
      lut_[byte] = i;
    }
  }

  /// Printable 7-bit characters '!' (33) through '~' (126); id = codepoint - 33.
  static Charset printable94() {
    std::string s;
    for (int c = 33; c <= 126; ++c) s.push_back(static_cast<char>(c));
    return Charset(std::move(s));
  }

  /// Digits then lowercase letters; the 36-char toy setting.
  static Charset lower_alnum36() {
    return Charset("0123456789abcdefghijklmnopqrstuvwxyz");
  }

  /// One character per line, order defines ids. Lines starting with '#'
  /// and empty lines are ignored.
  static Charset from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open charset file: " + path);
    std::string s, line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (line.size() != 1)
        throw ConfigError("charset line is not a single character: \"" + line +
                          "\" (" + path + ")");
      s.push_back(line[0]);
    }
    return Charset(std::move(s));
  }

  int size() const { return static_cast<int>(chars_.size()); }
  bool contains(char c) const { return lut_[static_cast<unsigned char>(c)] >= 0; }
  /// Id of c, or -1 when absent.
  int id_of(char c) const { return lut_[static_cast<unsigned char>(c)]; }
  char char_at(int id) const { return chars_.at(static_cast<std::size_t>(id)); }
  const std::string& chars() const { return chars_; }

  bool operator==(const Charset& other) const { return chars_ == other.chars_; }

 private:
  std::string chars_;
  std::array<int, 256> lut_{};
};

/// Charset plus the three special tokens. Ids are dense in [0, K):
/// characters first, then EOS < PAD < MASK.
struct Vocabulary {
  Charset charset;

  explicit Vocabulary(Charset cs) : charset(std::move(cs)) {}

  int eos() const { return charset.size(); }
  int pad() const { return charset.size() + 1; }
  int mask() const { return charset.size() + 2; }
  int size() const { return charset.size() + 3; }
  bool is_char(int id) const { return id >= 0 && id < charset.size(); }
};

/// Lays out [c_1 .. c_n, EOS, PAD...] of total length L.
inline TokenSeq encode_label(const std::string& label, const Vocabulary& vocab,
                             int L) {
  if (static_cast<int>(label.size()) > L - 1)
    throw LabelTooLong("label of length " + std::to_string(label.size()) +
                       " exceeds maximum " + std::to_string(L - 1));
  TokenSeq out(static_cast<std::size_t>(L), vocab.pad());
  for (std::size_t i = 0; i < label.size(); ++i) {
    const int id = vocab.charset.id_of(label[i]);
    if (id < 0)
      throw UnknownCharacter("unknown character '" + std::string(1, label[i]) +
                             "' at position " + std::to_string(i));
    out[i] = id;
  }
  out[label.size()] = vocab.eos();
  return out;
}

/// Characters strictly before the first non-character token. Total: MASK,
/// EOS and PAD all terminate the string.
inline std::string decode_tokens(const TokenSeq& tokens, const Vocabulary& vocab) {
  std::string out;
  for (const int id : tokens) {
    if (!vocab.is_char(id)) break;
    out.push_back(vocab.charset.char_at(id));
  }
  return out;
}

inline bool is_clean(const TokenSeq& x0, const Vocabulary& vocab) {
  // Clean layout: chars, exactly one EOS, then PAD to the end.
  std::size_t i = 0;
  while (i < x0.size() && vocab.is_char(x0[i])) ++i;
  if (i == x0.size() || x0[i] != vocab.eos()) return false;
  for (++i; i < x0.size(); ++i)
    if (x0[i] != vocab.pad()) return false;
  return true;
}

/// 1 where the position holds a charset token, 0 at EOS/PAD.
inline std::vector<std::uint8_t> presence_targets(const TokenSeq& x0,
                                                  const Vocabulary& vocab) {
  std::vector<std::uint8_t> out(x0.size(), 0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (x0[i] == vocab.mask())
      throw NotClean("MASK token at position " + std::to_string(i) +
                     " in a sequence passed as clean");
    out[i] = vocab.is_char(x0[i]) ? 1 : 0;
  }
  return out;
}

}  // namespace diffstr
