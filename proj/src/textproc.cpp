#include "affectlab/textproc.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "affectlab/errors.hpp"

namespace affectlab {

namespace {

bool is_split_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
    case ':':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(ascii_lower(c));
    }
  }
  flush();
  return out;
}

Vocab::Vocab() : tokens_{"<pad>", "<unk>"} {}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ArgumentError("vocab id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::span<const std::string> Vocab::regular_tokens() const {
  return std::span<const std::string>(tokens_).subspan(2);
}

Vocab Vocab::from_tokens(std::vector<std::string> regular, std::size_t min_count) {
  Vocab v;
  v.min_count_ = min_count;
  for (auto& t : regular) {
    if (t.empty()) throw DataError("vocab: empty token");
    const auto id = static_cast<std::int32_t>(v.tokens_.size());
    if (!v.index_.emplace(t, id).second) throw DataError("vocab: duplicate token '" + t + "'");
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocab build_vocab(std::span<const Tokens> corpus, std::size_t min_count) {
  if (min_count < 1) throw ArgumentError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> regular;
  regular.reserve(kept.size());
  for (auto& [tok, n] : kept) regular.push_back(tok);
  return Vocab::from_tokens(std::move(regular), min_count);
}

std::size_t EncodedText::content_length() const {
  return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(),
                                                [](std::int32_t id) { return id != kPadId; }));
}

EncodedText encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 1) throw ArgumentError("encode: max_len must be >= 1");
  EncodedText out;
  out.original_length = tokens.size();
  out.ids.assign(max_len, kPadId);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) out.ids[i] = vocab.id(tokens[i]);
  return out;
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file: " + path.string());
  for (const auto& t : vocab.regular_tokens()) out << t << '\n';
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocab file: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab::from_tokens(std::move(tokens));
}

}  // namespace affectlab
