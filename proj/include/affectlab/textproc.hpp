#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace affectlab {

using Tokens = std::vector<std::string>;

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

// Lowercases, splits on whitespace, and emits each of . , ! ? ; : as its own token.
Tokens tokenize(std::string_view text);

/// Token <-> id mapping. PAD is id 0 and UNK is id 1; regular tokens follow
/// in descending frequency, ties broken lexicographically.
class Vocab {
 public:
  Vocab();

  std::size_t size() const { return tokens_.size(); }
  std::size_t min_count() const { return min_count_; }

  // kUnkId for tokens not in the vocabulary.
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;

  // Regular tokens only, in id order (ids 2, 3, ...).
  std::span<const std::string> regular_tokens() const;

  static Vocab from_tokens(std::vector<std::string> regular, std::size_t min_count = 1);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t min_count_ = 1;
};

Vocab build_vocab(std::span<const Tokens> corpus, std::size_t min_count);

struct EncodedText {
  std::vector<std::int32_t> ids;  // always exactly max_len long
  std::size_t original_length = 0;

  std::size_t content_length() const;  // number of non-PAD ids
};

EncodedText encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len);

// One regular token per line; line n holds id n + 2.
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace affectlab
