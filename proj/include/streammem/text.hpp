#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace streammem::text {

/// Lowercases ASCII letters and deletes every code point in a Unicode
/// punctuation category (Pc, Pd, Ps, Pe, Pi, Pf, Po). Digits, symbols and
/// other scripts pass through. Idempotent.
std::string strip_punctuation_lower(std::string_view s);

/// Whitespace split of strip_punctuation_lower(s). No stemming.
std::vector<std::string> raw_tokens(std::string_view s);

/// Classic Porter (1980) suffix stripper, steps 1a through 5b.
/// Input must be lowercase; tokens containing anything other than a-z are
/// returned unchanged.
std::string porter_stem(std::string_view token);

/// raw_tokens followed by porter_stem on each token. Stopwords are kept.
std::vector<std::string> normalize_tokens(std::string_view s);

/// The fixed 50-word English stopword list used by the lexical index.
std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view lowercase_token);

/// Terms used by lexical indexes: normalized tokens with stopwords removed
/// (the stopword test runs on the unstemmed token).
std::vector<std::string> index_terms(std::string_view s);

/// Splits on '.', '!' or '?' followed by whitespace or end of input.
/// Terminal punctuation stays with its sentence; empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view s);

std::string trim(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);

/// Whitespace-separated word count.
std::size_t word_count(std::string_view s);

}  // namespace streammem::text
