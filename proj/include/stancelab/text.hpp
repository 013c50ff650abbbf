// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small ASCII/UTF-8 string helpers shared across modules.
namespace stancelab {

std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);
std::size_t utf8_sequence_length(unsigned char lead);
std::size_t utf8_length(std::string_view s);
std::size_t whitespace_word_count(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
// Mirrors Python's str.isupper() for ASCII letters: at least one cased
// character and no lowercase ones.
bool is_all_upper(std::string_view s);
std::string html_escape(std::string_view s);

}  // namespace stancelab
