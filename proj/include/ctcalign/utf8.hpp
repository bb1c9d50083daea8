#pragma once

#include <string>
#include <string_view>

namespace ctcalign::utf8 {

// Throws FormatError on invalid sequences, overlongs and surrogates.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view text);
std::string encode(char32_t c);

// "U+00E9 'é'" style description for diagnostics.
std::string describe(char32_t c);

bool is_whitespace(char32_t c);

}  // namespace ctcalign::utf8
