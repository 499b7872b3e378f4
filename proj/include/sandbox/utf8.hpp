#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// All span offsets in this codebase are Unicode code points, never bytes.
// These helpers convert between the two views of a UTF-8 string.

namespace sandbox::utf8 {

// Number of code points in a UTF-8 string. Invalid lead bytes count as one
// code point each so that offsets stay monotone on malformed input.
std::size_t length(std::string_view s);

// Byte offset of the code point at index `cp`. Returns s.size() when cp is
// at or past the end.
std::size_t byte_offset(std::string_view s, std::size_t cp);

// Substring [start, start+len) counted in code points.
std::string substr(std::string_view s, std::size_t start, std::size_t len);

// Decoded code points paired with their byte offsets; the trailing entry
// holds (s.size(), cp_count) as a sentinel.
struct CodePointIndex {
    std::vector<std::size_t> byte_of_cp;  // size = cp_count + 1

    std::size_t cp_count() const { return byte_of_cp.size() - 1; }
    std::size_t cp_of_byte(std::size_t byte) const;
};

CodePointIndex index(std::string_view s);

// Decode to code point values (for character-class checks).
std::vector<char32_t> decode(std::string_view s);

}  // namespace sandbox::utf8
