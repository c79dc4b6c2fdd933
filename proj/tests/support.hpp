#pragma once

#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace testing {

inline cqasim::TopicContext context(std::string id, std::string section_text, std::string background = "")
{
    cqasim::TopicContext c;
    c.id = std::move(id);
    c.title = "Ada Lovelace";
    c.background = std::move(background);
    c.section_header = "Early life";
    c.section_text = std::move(section_text);
    return c;
}

inline cqasim::Answer found(const cqasim::TopicContext& ctx, const std::string& span_text)
{
    const auto byte = ctx.section_text.find(span_text);
    cqasim::Answer a;
    a.kind = cqasim::AnswerKind::Found;
    const auto start = cqasim::text::byte_to_codepoint(ctx.section_text, byte);
    a.spans.push_back({span_text, start, start + cqasim::text::codepoint_count(span_text)});
    a.raw_text = span_text;
    return a;
}

inline cqasim::Answer cannot_find() { return cqasim::Answer::cannot_find(); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cqasim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& contents) const
    {
        const auto p = path_ / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary) << contents;
        return p;
    }

private:
    std::filesystem::path path_;
};

} // namespace testing
