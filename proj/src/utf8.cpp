#include "sandbox/utf8.hpp"

#include <algorithm>

namespace sandbox::utf8 {

namespace {

inline bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

inline std::size_t seq_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;  // invalid lead byte, advance one
}

}  // namespace

std::size_t length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size();) {
        i += seq_len(static_cast<unsigned char>(s[i]));
        i = std::min(i, s.size());
        ++n;
    }
    return n;
}

std::size_t byte_offset(std::string_view s, std::size_t cp) {
    std::size_t i = 0;
    while (cp > 0 && i < s.size()) {
        i += seq_len(static_cast<unsigned char>(s[i]));
        i = std::min(i, s.size());
        --cp;
    }
    return i;
}

std::string substr(std::string_view s, std::size_t start, std::size_t len) {
    const std::size_t b0 = byte_offset(s, start);
    const std::size_t b1 = byte_offset(s, start + len);
    return std::string(s.substr(b0, b1 - b0));
}

CodePointIndex index(std::string_view s) {
    CodePointIndex idx;
    idx.byte_of_cp.reserve(s.size() + 1);
    for (std::size_t i = 0; i < s.size();) {
        idx.byte_of_cp.push_back(i);
        i += seq_len(static_cast<unsigned char>(s[i]));
        i = std::min(i, s.size());
    }
    idx.byte_of_cp.push_back(s.size());
    return idx;
}

std::size_t CodePointIndex::cp_of_byte(std::size_t byte) const {
    auto it = std::upper_bound(byte_of_cp.begin(), byte_of_cp.end(), byte);
    return static_cast<std::size_t>(it - byte_of_cp.begin()) - 1;
}

std::vector<char32_t> decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const unsigned char lead = static_cast<unsigned char>(s[i]);
        std::size_t n = seq_len(lead);
        if (i + n > s.size()) n = 1;
        char32_t cp = 0;
        switch (n) {
            case 1: cp = lead; break;
            case 2: cp = lead & 0x1F; break;
            case 3: cp = lead & 0x0F; break;
            case 4: cp = lead & 0x07; break;
        }
        bool ok = true;
        for (std::size_t k = 1; k < n; ++k) {
            const unsigned char c = static_cast<unsigned char>(s[i + k]);
            if (!is_continuation(c)) { ok = false; break; }
            cp = (cp << 6) | (c & 0x3F);
        }
        if (!ok) { cp = lead; n = 1; }
        out.push_back(cp);
        i += n;
    }
    return out;
}

}  // namespace sandbox::utf8
