#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cqasim::text {

// UTF-8 helpers. Offsets exposed outside this module count Unicode scalar
// values; byte offsets stay internal.
std::size_t codepoint_count(std::string_view s);
std::size_t byte_to_codepoint(std::string_view s, std::size_t byte_offset);
std::size_t codepoint_to_byte(std::string_view s, std::size_t cp_offset);
std::string substr_codepoints(std::string_view s, std::size_t start, std::size_t end);

bool is_space(char c);
std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// A rewritten copy of some source text that remembers, for every byte,
/// which byte of the source produced it.
struct NormalizedText {
    std::string text;
    std::vector<std::size_t> origin;
};

NormalizedText identity_view(std::string_view s);
/// Collapses every whitespace run (ASCII whitespace and U+00A0) to one space
/// and trims both ends.
NormalizedText collapse_whitespace(const NormalizedText& in);
/// Drops balanced "( ... )" groups together with one preceding space, then
/// collapses whitespace again. Square and curly brackets are left alone.
NormalizedText remove_parenthesized(const NormalizedText& in);
NormalizedText lowercase(const NormalizedText& in);

std::string collapse_whitespace(std::string_view s);
std::string remove_parenthesized(std::string_view s);

struct CharInterval {
    std::size_t start = 0; // code points, inclusive
    std::size_t end = 0;   // code points, exclusive

    std::size_t length() const { return end - start; }
    friend bool operator==(const CharInterval&, const CharInterval&) = default;
};

enum class MatchRoute {
    Exact,
    WhitespaceCollapsed,
    ParenthesesRemoved,
    CaseInsensitive,
};

const char* to_string(MatchRoute route);

struct SpanMatch {
    CharInterval interval;
    MatchRoute route = MatchRoute::Exact;
    bool trimmed_trailing_punctuation = false;
};

/// Finds answer segments inside a fixed document. Tries, in order: the raw
/// document, its whitespace-collapsed form, its parentheses-removed form, and
/// then the same three forms case-folded. The first route that matches wins
/// and the earliest occurrence within that route is reported, mapped back to
/// the original document.
class SpanLocator {
public:
    explicit SpanLocator(std::string_view document);

    std::optional<SpanMatch> find(std::string_view segment) const;
    const std::string& document() const { return document_; }

private:
    std::optional<SpanMatch> find_once(std::string_view segment) const;
    CharInterval map_back(const NormalizedText& view, std::size_t pos, std::size_t len) const;

    std::string document_;
    NormalizedText raw_;
    NormalizedText collapsed_;
    NormalizedText unparenthesized_;
    NormalizedText raw_lower_;
    NormalizedText collapsed_lower_;
    NormalizedText unparenthesized_lower_;
};

/// 64-bit FNV-1a. Pinned: seeds derived from it are persisted in datasets.
std::uint64_t stable_hash(std::string_view s);

} // namespace cqasim::text
