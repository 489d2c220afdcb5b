#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace eif {

std::string sha256_hex(std::string_view bytes);
//! Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::string& path);

//! Independent seed for a named random stream derived from one master seed.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name);

} // namespace eif
