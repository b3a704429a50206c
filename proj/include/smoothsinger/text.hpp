#pragma once

#include <string>
#include <utility>
#include <vector>

namespace smoothsinger {

// Parsers for "key = value" configuration text. Failures throw ConfigError
// naming the key.
std::size_t parse_size(const std::string& key, const std::string& text);
double parse_real(const std::string& key, const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text);

std::string trim(const std::string& s);
// Round-trippable decimal form (%.17g).
std::string real_text(double v);
std::string join(const std::vector<std::size_t>& v);

// Splits non-empty, non-comment lines at the first '='; both sides trimmed.
std::vector<std::pair<std::string, std::string>> key_value_lines(const std::string& text, const std::string& what);

}  // namespace smoothsinger
