#pragma once

// Shared plumbing: errors, string/token helpers, UTF-8 case folding for
// Czech text, a portable seeded RNG, content hashing and small file I/O.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace csnlg {

// ---------------------------------------------------------------------------
// Errors

struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at offset " + std::to_string(off) + ")"), offset(off) {}
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Strings and tokens

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Whitespace tokenization; collapses runs of spaces.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\n' && s[j] != '\r') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join(const std::vector<std::string>& toks, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += sep;
        out += toks[i];
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// True for plain numerals like "218", "4.5" or "4,50".
inline bool is_numeral(std::string_view s) {
    if (s.empty()) return false;
    bool digit_seen = false, sep_seen = false;
    for (char c : s) {
        if (c >= '0' && c <= '9') { digit_seen = true; continue; }
        if ((c == '.' || c == ',') && !sep_seen && digit_seen) { sep_seen = true; continue; }
        return false;
    }
    return digit_seen;
}

// ---------------------------------------------------------------------------
// UTF-8 case folding
//
// Covers ASCII, Latin-1 Supplement and Latin Extended-A, which is all Czech
// needs (Á Č Ď É Ě Í Ň Ó Ř Š Ť Ú Ů Ý Ž and friends). Anything else passes
// through unchanged.

inline std::uint32_t lower_codepoint(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;      // Latin-1 capitals
    if (cp >= 0x100 && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;  // Ext-A even/odd pairs
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    return cp;
}

inline std::string utf8_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::uint32_t cp = 0;
        std::size_t len = 1;
        if (c < 0x80) { cp = c; }
        else if ((c >> 5) == 0x6 && i + 1 < s.size()) { cp = ((c & 0x1F) << 6) | (s[i + 1] & 0x3F); len = 2; }
        else if ((c >> 4) == 0xE && i + 2 < s.size()) {
            cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
            len = 3;
        } else {
            out += s[i++];  // invalid or 4-byte sequence: copy as-is
            continue;
        }
        std::uint32_t lo = lower_codepoint(cp);
        if (lo < 0x80) out += static_cast<char>(lo);
        else if (lo < 0x800) {
            out += static_cast<char>(0xC0 | (lo >> 6));
            out += static_cast<char>(0x80 | (lo & 0x3F));
        } else {
            out += static_cast<char>(0xE0 | (lo >> 12));
            out += static_cast<char>(0x80 | ((lo >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (lo & 0x3F));
        }
        i += len;
    }
    return out;
}

// ---------------------------------------------------------------------------
// RNG
//
// mt19937_64 with hand-rolled draws. std::uniform_int_distribution is not
// bit-stable across standard libraries; frozen-value tests need draws that
// depend only on the engine.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, bound) via rejection sampling.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::below: zero bound");
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do { v = eng_(); } while (v >= limit);
        return v % bound;
    }

    std::size_t index(std::size_t size) { return static_cast<std::size_t>(below(size)); }

    // Uniform double in [0, 1) with 53-bit resolution.
    double real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double real(double lo, double hi) { return lo + (hi - lo) * real(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    // Independent child stream, stable under unrelated draws from the parent.
    Rng derive(std::uint64_t salt) const {
        std::uint64_t x = seed_ ^ (salt * 0x9E3779B97F4A7C15ull);
        x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27; x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return Rng(x);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_;
};

// FNV-1a: stable 64-bit string hash (seed derivation must not depend on
// std::hash, which varies across standard libraries).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// SHA-1 (content hashes for run manifests)

class Sha1 {
public:
    Sha1() { reset(); }

    void reset() {
        h_ = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        buf_.clear();
        total_ = 0;
    }

    void update(std::string_view data) {
        total_ += data.size();
        buf_.append(data);
        while (buf_.size() >= 64) {
            block(reinterpret_cast<const unsigned char*>(buf_.data()));
            buf_.erase(0, 64);
        }
    }

    std::string hex_digest() {
        std::string tail = buf_;
        std::uint64_t bits = total_ * 8;
        tail += static_cast<char>(0x80);
        while (tail.size() % 64 != 56) tail += '\0';
        for (int i = 7; i >= 0; --i) tail += static_cast<char>((bits >> (8 * i)) & 0xFF);
        for (std::size_t off = 0; off < tail.size(); off += 64)
            block(reinterpret_cast<const unsigned char*>(tail.data()) + off);
        std::ostringstream os;
        for (std::uint32_t v : h_) {
            for (int i = 7; i >= 0; --i) os << "0123456789abcdef"[(v >> (4 * i)) & 0xF];
        }
        buf_.clear();
        return os.str();
    }

    static std::string of(std::string_view data) {
        Sha1 s;
        s.update(data);
        return s.hex_digest();
    }

private:
    void block(const unsigned char* p) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        auto rol = [](std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); };
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) { f = (b & c) | (~b & d); k = 0x5A827999; }
            else if (i < 40) { f = b ^ c ^ d; k = 0x6ED9EBA1; }
            else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8F1BBCDC; }
            else { f = b ^ c ^ d; k = 0xCA62C1D6; }
            std::uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d; d = c; c = rol(b, 30); b = a; a = t;
        }
        h_[0] += a; h_[1] += b; h_[2] += c; h_[3] += d; h_[4] += e;
    }

    std::array<std::uint32_t, 5> h_;
    std::string buf_;
    std::uint64_t total_ = 0;
};

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace csnlg
