#include "eif/tokenizer.hpp"

#include <stdexcept>

namespace eif {

bool CharTokenizer::in_vocab(char c) { return c == '\n' || (c >= 32 && c <= 126); }

std::vector<int> CharTokenizer::encode(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n')
      ids.push_back(newline);
    else if (c >= 32 && c <= 126)
      ids.push_back(2 + (c - 32));
    else
      throw std::invalid_argument("CharTokenizer: byte " + std::to_string(static_cast<unsigned char>(c)) +
                                  " at offset " + std::to_string(i) + " is not in the vocabulary");
  }
  return ids;
}

std::string CharTokenizer::decode(std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (id == bos)
      continue;
    if (id == newline)
      out += '\n';
    else if (id >= 2 && id < static_cast<int>(vocab_size))
      out += static_cast<char>(32 + id - 2);
    else
      throw std::invalid_argument("CharTokenizer: id " + std::to_string(id) + " out of range");
  }
  return out;
}

} // namespace eif
