#include "streammem/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace streammem::text {

namespace {

constexpr std::array<std::string_view, 50> kStopwords = {
    "a",    "an",   "the",  "and",  "or",   "but",  "if",   "of",   "at",    "by",
    "for",  "with", "about", "to",  "from", "in",   "on",   "is",   "are",   "was",
    "were", "be",   "been", "am",   "do",   "does", "did",  "have", "has",   "had",
    "i",    "you",  "he",   "she",  "it",   "we",   "they", "me",   "my",    "your",
    "his",  "her",  "its",  "our",  "their", "this", "that", "what", "which", "who",
};

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode as themselves so they pass through untouched.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = b0;
    len = 1;
    if (b0 >= 0xC0 && b0 < 0xE0 && i + 1 < s.size()) {
        cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
        len = 2;
    } else if (b0 >= 0xE0 && b0 < 0xF0 && i + 2 < s.size()) {
        cp = ((b0 & 0x0Fu) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
             (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
        len = 3;
    } else if (b0 >= 0xF0 && i + 3 < s.size()) {
        cp = ((b0 & 0x07u) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
             ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
             (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
        len = 4;
    }
    i += len;
    return cp;
}

bool in(std::uint32_t cp, std::uint32_t lo, std::uint32_t hi) { return cp >= lo && cp <= hi; }

// General category P* for ASCII, Latin-1 and the common punctuation blocks.
bool is_unicode_punct(std::uint32_t cp) {
    if (cp < 0x80) {
        switch (cp) {
            case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
            case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
            case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
                return true;
            default:
                return false;
        }
    }
    switch (cp) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
        case 0x37E: case 0x387: case 0x55A: case 0x589: case 0x5BE: case 0x60C: case 0x61F:
        case 0x6D4: case 0x964: case 0x965:
            return true;
        default:
            break;
    }
    return in(cp, 0x2010, 0x2027) || in(cp, 0x2030, 0x2043) || in(cp, 0x2045, 0x2051) ||
           in(cp, 0x2053, 0x205E) || in(cp, 0x207D, 0x207E) || in(cp, 0x208D, 0x208E) ||
           in(cp, 0x2308, 0x230B) || in(cp, 0x2329, 0x232A) || in(cp, 0x2E00, 0x2E4F) ||
           in(cp, 0x3001, 0x3003) || in(cp, 0x3008, 0x3011) || in(cp, 0x3014, 0x301F) ||
           cp == 0x3030 || cp == 0x303D || cp == 0x30A0 || cp == 0x30FB ||
           in(cp, 0xFE10, 0xFE19) || in(cp, 0xFE30, 0xFE52) || in(cp, 0xFE54, 0xFE61) ||
           cp == 0xFE63 || cp == 0xFE68 || in(cp, 0xFE6A, 0xFE6B) || in(cp, 0xFF01, 0xFF03) ||
           in(cp, 0xFF05, 0xFF0A) || in(cp, 0xFF0C, 0xFF0F) || in(cp, 0xFF1A, 0xFF1B) ||
           in(cp, 0xFF1F, 0xFF20) || in(cp, 0xFF3B, 0xFF3D) || cp == 0xFF3F || cp == 0xFF5B ||
           cp == 0xFF5D || in(cp, 0xFF5F, 0xFF65);
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// ---------------------------------------------------------------------------
// Porter stemmer. Operates on a lowercase a-z buffer.

class PorterStemmer {
public:
    explicit PorterStemmer(std::string word) : w_(std::move(word)) {}

    std::string run() {
        step1a();
        step1b();
        step1c();
        step2();
        step3();
        step4();
        step5a();
        step5b();
        return std::move(w_);
    }

private:
    std::string w_;

    bool consonant(const std::string& s, std::size_t i) const {
        switch (s[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 || !consonant(s, i - 1);
            default:
                return true;
        }
    }

    // Number of VC sequences in s, the m of [C](VC)^m[V].
    int measure(const std::string& s) const {
        int m = 0;
        std::size_t i = 0;
        const std::size_t n = s.size();
        while (i < n && consonant(s, i)) ++i;
        while (i < n) {
            while (i < n && !consonant(s, i)) ++i;
            if (i >= n) break;
            while (i < n && consonant(s, i)) ++i;
            ++m;
        }
        return m;
    }

    bool has_vowel(const std::string& s) const {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!consonant(s, i)) return true;
        }
        return false;
    }

    bool double_consonant(const std::string& s) const {
        const auto n = s.size();
        return n >= 2 && s[n - 1] == s[n - 2] && consonant(s, n - 1);
    }

    // *o: stem ends consonant-vowel-consonant, last consonant not w, x or y.
    bool cvc(const std::string& s) const {
        const auto n = s.size();
        if (n < 3) return false;
        if (!consonant(s, n - 3) || consonant(s, n - 2) || !consonant(s, n - 1)) return false;
        const char c = s[n - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view suffix) const {
        return w_.size() >= suffix.size() &&
               std::string_view(w_).substr(w_.size() - suffix.size()) == suffix;
    }

    std::string stem_without(std::string_view suffix) const {
        return w_.substr(0, w_.size() - suffix.size());
    }

    struct Rule {
        std::string_view suffix;
        std::string_view replacement;
    };

    // Applies the rule with the longest matching suffix, if its stem passes
    // `cond`. Rules within one step are listed so the first match is the
    // longest one.
    template <class Cond>
    bool apply_first(std::span<const Rule> rules, Cond cond) {
        for (const auto& r : rules) {
            if (!ends(r.suffix)) continue;
            std::string stem = stem_without(r.suffix);
            if (cond(stem)) {
                w_ = std::move(stem);
                w_.append(r.replacement);
                return true;
            }
            return false;
        }
        return false;
    }

    void step1a() {
        static constexpr Rule rules[] = {{"sses", "ss"}, {"ies", "i"}, {"ss", "ss"}, {"s", ""}};
        apply_first(rules, [](const std::string&) { return true; });
    }

    void step1b() {
        if (ends("eed")) {
            std::string stem = stem_without("eed");
            if (measure(stem) > 0) w_ = stem + "ee";
            return;
        }
        bool removed = false;
        for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
            if (ends(suffix)) {
                std::string stem = stem_without(suffix);
                if (has_vowel(stem)) {
                    w_ = std::move(stem);
                    removed = true;
                }
                break;
            }
        }
        if (!removed) return;
        if (ends("at") || ends("bl") || ends("iz")) {
            w_ += 'e';
        } else if (double_consonant(w_)) {
            const char last = w_.back();
            if (last != 'l' && last != 's' && last != 'z') w_.pop_back();
        } else if (measure(w_) == 1 && cvc(w_)) {
            w_ += 'e';
        }
    }

    void step1c() {
        if (ends("y")) {
            std::string stem = stem_without("y");
            if (has_vowel(stem)) w_ = stem + "i";
        }
    }

    void step2() {
        static constexpr Rule rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        };
        apply_first(rules, [this](const std::string& s) { return measure(s) > 0; });
    }

    void step3() {
        static constexpr Rule rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        };
        apply_first(rules, [this](const std::string& s) { return measure(s) > 0; });
    }

    void step4() {
        static constexpr std::string_view suffixes[] = {
            "al",   "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
            "ent",  "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize",
        };
        // Longest match first: "ement" before "ment" before "ent".
        std::string_view best;
        for (auto suffix : suffixes) {
            if (ends(suffix) && suffix.size() > best.size()) best = suffix;
        }
        if (best.empty()) return;
        std::string stem = stem_without(best);
        if (measure(stem) <= 1) return;
        if (best == "ion") {
            if (stem.empty() || (stem.back() != 's' && stem.back() != 't')) return;
        }
        w_ = std::move(stem);
    }

    void step5a() {
        if (!ends("e")) return;
        std::string stem = stem_without("e");
        const int m = measure(stem);
        if (m > 1 || (m == 1 && !cvc(stem))) w_ = std::move(stem);
    }

    void step5b() {
        if (measure(w_) > 1 && double_consonant(w_) && w_.back() == 'l') w_.pop_back();
    }
};

}  // namespace

std::string strip_punctuation_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t start = i;
        std::size_t len = 0;
        const std::uint32_t cp = decode_utf8(s, i, len);
        if (is_unicode_punct(cp)) continue;
        if (cp < 0x80) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(cp)));
        } else {
            out.append(s.substr(start, len));
        }
    }
    return out;
}

std::vector<std::string> raw_tokens(std::string_view s) {
    const std::string cleaned = strip_punctuation_lower(s);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && is_space(cleaned[i])) ++i;
        const std::size_t start = i;
        while (i < cleaned.size() && !is_space(cleaned[i])) ++i;
        if (i > start) tokens.emplace_back(cleaned.substr(start, i - start));
    }
    return tokens;
}

std::string porter_stem(std::string_view token) {
    if (token.empty()) return std::string(token);
    for (char c : token) {
        if (c < 'a' || c > 'z') return std::string(token);
    }
    return PorterStemmer(std::string(token)).run();
}

std::vector<std::string> normalize_tokens(std::string_view s) {
    auto tokens = raw_tokens(s);
    for (auto& t : tokens) t = porter_stem(t);
    return tokens;
}

std::span<const std::string_view> stopwords() { return kStopwords; }

bool is_stopword(std::string_view lowercase_token) {
    return std::find(kStopwords.begin(), kStopwords.end(), lowercase_token) != kStopwords.end();
}

std::vector<std::string> index_terms(std::string_view s) {
    std::vector<std::string> terms;
    for (auto& t : raw_tokens(s)) {
        if (!is_stopword(t)) terms.push_back(porter_stem(t));
    }
    return terms;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        while (j < s.size() && (s[j] == '.' || s[j] == '!' || s[j] == '?')) ++j;
        if (j == s.size() || is_space(s[j])) {
            auto piece = trim(s.substr(start, j - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = j;
        }
        i = j - 1;
    }
    auto tail = trim(s.substr(std::min(start, s.size())));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

}  // namespace streammem::text
