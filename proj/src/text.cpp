#include "cqasim/text.hpp"

#include <algorithm>

namespace cqasim::text {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Width in bytes of a whitespace character starting at i, or 0.
std::size_t whitespace_width(std::string_view s, std::size_t i)
{
    if (is_space(s[i]))
        return 1;
    if (static_cast<unsigned char>(s[i]) == 0xC2 && i + 1 < s.size() &&
        static_cast<unsigned char>(s[i + 1]) == 0xA0)
        return 2;
    return 0;
}

bool is_trailing_punct(char c)
{
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

} // namespace

std::size_t codepoint_count(std::string_view s)
{
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return !is_continuation(static_cast<unsigned char>(c));
    }));
}

std::size_t byte_to_codepoint(std::string_view s, std::size_t byte_offset)
{
    return codepoint_count(s.substr(0, std::min(byte_offset, s.size())));
}

std::size_t codepoint_to_byte(std::string_view s, std::size_t cp_offset)
{
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_continuation(static_cast<unsigned char>(s[i]))) {
            if (seen == cp_offset)
                return i;
            ++seen;
        }
    }
    return s.size();
}

std::string substr_codepoints(std::string_view s, std::size_t start, std::size_t end)
{
    const auto b = codepoint_to_byte(s, start);
    const auto e = codepoint_to_byte(s, end);
    if (e <= b)
        return {};
    return std::string(s.substr(b, e - b));
}

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b]))
        ++b;
    while (e > b && is_space(s[e - 1]))
        --e;
    return s.substr(b, e - b);
}

std::vector<std::string_view> split_whitespace(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i]))
            ++i;
        const auto start = i;
        while (i < s.size() && !is_space(s[i]))
            ++i;
        if (i > start)
            out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::string to_lower_ascii(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

NormalizedText identity_view(std::string_view s)
{
    NormalizedText out;
    out.text = std::string(s);
    out.origin.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        out.origin[i] = i;
    return out;
}

NormalizedText collapse_whitespace(const NormalizedText& in)
{
    NormalizedText out;
    out.text.reserve(in.text.size());
    out.origin.reserve(in.text.size());
    const std::string_view s = in.text;
    std::size_t i = 0;
    while (i < s.size()) {
        if (auto w = whitespace_width(s, i); w > 0) {
            const auto run_origin = in.origin[i];
            while (i < s.size() && (w = whitespace_width(s, i)) > 0)
                i += w;
            if (!out.text.empty() && i < s.size()) {
                out.text.push_back(' ');
                out.origin.push_back(run_origin);
            }
            continue;
        }
        out.text.push_back(s[i]);
        out.origin.push_back(in.origin[i]);
        ++i;
    }
    return out;
}

NormalizedText remove_parenthesized(const NormalizedText& in)
{
    const std::string_view s = in.text;
    std::vector<bool> drop(s.size(), false);
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(') {
            open.push_back(i);
        } else if (s[i] == ')' && !open.empty()) {
            const auto start = open.back();
            open.pop_back();
            if (open.empty()) {
                std::fill(drop.begin() + static_cast<std::ptrdiff_t>(start),
                          drop.begin() + static_cast<std::ptrdiff_t>(i + 1), true);
                if (start > 0 && s[start - 1] == ' ')
                    drop[start - 1] = true;
            }
        }
    }
    NormalizedText kept;
    kept.text.reserve(s.size());
    kept.origin.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!drop[i]) {
            kept.text.push_back(s[i]);
            kept.origin.push_back(in.origin[i]);
        }
    }
    return collapse_whitespace(kept);
}

NormalizedText lowercase(const NormalizedText& in)
{
    return NormalizedText{to_lower_ascii(in.text), in.origin};
}

std::string collapse_whitespace(std::string_view s)
{
    return collapse_whitespace(identity_view(s)).text;
}

std::string remove_parenthesized(std::string_view s)
{
    return remove_parenthesized(collapse_whitespace(identity_view(s))).text;
}

const char* to_string(MatchRoute route)
{
    switch (route) {
    case MatchRoute::Exact:
        return "exact";
    case MatchRoute::WhitespaceCollapsed:
        return "whitespace_collapsed";
    case MatchRoute::ParenthesesRemoved:
        return "parentheses_removed";
    case MatchRoute::CaseInsensitive:
        return "case_insensitive";
    }
    return "unknown";
}

SpanLocator::SpanLocator(std::string_view document)
    : document_(document)
    , raw_(identity_view(document))
    , collapsed_(collapse_whitespace(raw_))
    , unparenthesized_(remove_parenthesized(collapsed_))
    , raw_lower_(lowercase(raw_))
    , collapsed_lower_(lowercase(collapsed_))
    , unparenthesized_lower_(lowercase(unparenthesized_))
{
}

CharInterval SpanLocator::map_back(const NormalizedText& view, std::size_t pos, std::size_t len) const
{
    const auto byte_start = view.origin[pos];
    const auto byte_end = view.origin[pos + len - 1] + 1;
    const std::string_view doc = document_;
    const auto start = byte_to_codepoint(doc, byte_start);
    return {start, start + codepoint_count(doc.substr(byte_start, byte_end - byte_start))};
}

std::optional<SpanMatch> SpanLocator::find_once(std::string_view segment) const
{
    const auto trimmed = trim(segment);
    if (trimmed.empty())
        return std::nullopt;
    const auto collapsed = collapse_whitespace(trimmed);
    const auto unparenthesized = remove_parenthesized(collapsed);

    struct Attempt {
        const NormalizedText* view;
        std::string needle;
        MatchRoute route;
    };
    const Attempt attempts[] = {
        {&raw_, std::string(trimmed), MatchRoute::Exact},
        {&collapsed_, collapsed, MatchRoute::WhitespaceCollapsed},
        {&unparenthesized_, unparenthesized, MatchRoute::ParenthesesRemoved},
        {&raw_lower_, to_lower_ascii(trimmed), MatchRoute::CaseInsensitive},
        {&collapsed_lower_, to_lower_ascii(collapsed), MatchRoute::CaseInsensitive},
        {&unparenthesized_lower_, to_lower_ascii(unparenthesized), MatchRoute::CaseInsensitive},
    };
    for (const auto& a : attempts) {
        if (a.needle.empty())
            continue;
        const auto pos = a.view->text.find(a.needle);
        if (pos != std::string::npos)
            return SpanMatch{map_back(*a.view, pos, a.needle.size()), a.route, false};
    }
    return std::nullopt;
}

std::optional<SpanMatch> SpanLocator::find(std::string_view segment) const
{
    if (auto m = find_once(segment))
        return m;
    auto stripped = trim(segment);
    bool changed = false;
    while (!stripped.empty() && is_trailing_punct(stripped.back())) {
        stripped.remove_suffix(1);
        changed = true;
    }
    stripped = trim(stripped);
    if (!changed || stripped.empty())
        return std::nullopt;
    auto m = find_once(stripped);
    if (m)
        m->trimmed_trailing_punctuation = true;
    return m;
}

std::uint64_t stable_hash(std::string_view s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace cqasim::text
