#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eif {

//! Character-level vocabulary: <bos>, newline, then printable ASCII 32..126.
struct CharTokenizer {
  static constexpr int bos = 0;
  static constexpr int newline = 1;
  static constexpr std::size_t vocab_size = 2 + 95;

  static bool in_vocab(char c);
  //! Throws std::invalid_argument on characters outside the vocabulary.
  static std::vector<int> encode(std::string_view text);
  static std::string decode(std::span<const int> ids);
};

} // namespace eif
