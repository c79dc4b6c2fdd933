#pragma once

#include "cqasim/config.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cqasim {

inline constexpr std::string_view kCannotFindPhrase = "I cannot find the answer.";
inline constexpr std::string_view kQuacCannotAnswer = "CANNOTANSWER";

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structure violation; the message carries a record locator.
class MalformedFile : public CorpusError {
public:
    using CorpusError::CorpusError;
};

/// A stored answer offset disagrees with the stored answer text.
class OffsetMismatch : public CorpusError {
public:
    OffsetMismatch(std::string qa_id, const std::string& detail);
    const std::string& qa_id() const { return qa_id_; }

private:
    std::string qa_id_;
};

class IoFailure : public CorpusError {
public:
    using CorpusError::CorpusError;
};

struct TopicContext {
    std::string id;
    std::string title;
    std::string background;
    std::string section_header;
    std::string section_text;

    /// Throws MalformedFile when title, header or section text is empty.
    void validate() const;
    friend bool operator==(const TopicContext&, const TopicContext&) = default;
};

/// [start, end) in Unicode scalar values of section_text. `text` is always the
/// exact document substring at those offsets.
struct AnswerSpan {
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

enum class AnswerKind { Found, CannotFind };

struct Answer {
    AnswerKind kind = AnswerKind::CannotFind;
    std::vector<AnswerSpan> spans;
    std::string raw_text{kCannotFindPhrase};
    int attempts = 1;

    static Answer cannot_find(int attempts = 1);
    static Answer found(std::vector<AnswerSpan> spans, std::string raw_text, int attempts = 1);

    bool is_found() const { return kind == AnswerKind::Found; }
    /// Span texts joined with "; ", or the canonical phrase for CannotFind.
    std::string serialized() const;

    friend bool operator==(const Answer&, const Answer&) = default;
};

/// True for "I cannot find the answer" modulo case, surrounding whitespace and
/// trailing punctuation.
bool is_cannot_find_phrase(std::string_view raw);

struct Turn {
    std::size_t index = 0;
    std::string id;
    std::string question;
    Answer answer;
    std::optional<std::string> student_prompt_used;
    std::vector<std::string> teacher_reprompts;
    int student_attempts = 1;
    std::vector<std::string> student_corrections;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Conversation {
    TopicContext context;
    std::vector<Turn> turns;
    std::optional<SimulationConfig> config_snapshot;
    std::uint64_t seed = 0;
    std::string backend_id;
    std::optional<std::string> termination;

    const std::string& id() const { return context.id; }
    friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct Dataset {
    std::string name;
    std::vector<Conversation> conversations;

    const Conversation* find(std::string_view conversation_id) const;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class OffsetUnit { Character, Token };

struct LoadOptions {
    OffsetUnit offset_unit = OffsetUnit::Character;
};

struct LoadResult {
    Dataset dataset;
    /// One line per rejected record.
    std::vector<std::string> diagnostics;
};

/// Reads either the native record layout or QuAC's original layout
/// (data[].paragraphs[].qas[]). Throws on the first bad record.
Dataset load_quac(const std::filesystem::path& path, const LoadOptions& options = {});
/// Same, but rejected records are dropped and reported instead of thrown.
LoadResult load_quac_collect(const std::filesystem::path& path, const LoadOptions& options = {});

Dataset dataset_from_json(const nlohmann::json& doc, std::string name, const LoadOptions& options = {});
nlohmann::json dataset_to_json(const Dataset& ds);
nlohmann::json conversation_to_json(const Conversation& conv);

void export_dataset(const Dataset& ds, const std::filesystem::path& path);

/// One line-delimited record per turn: attempts, reprompts, guiding prompt.
void export_trace(const Dataset& ds, const std::filesystem::path& path);
std::string trace_lines(const Conversation& conv);

/// Keeps the first `limit` CannotFind turns of every conversation, drops the
/// rest, and renumbers turn indices.
Dataset filter_max_unanswered(const Dataset& ds, std::size_t limit = 3);

/// Reads a whole file; throws IoFailure.
std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames; throws IoFailure.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace cqasim
