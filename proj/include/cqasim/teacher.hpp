#pragma once

#include "cqasim/chat.hpp"
#include "cqasim/config.hpp"
#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cqasim::teacher {

inline constexpr std::string_view kShortestSpanReminder =
    "Remember that you should select the shortest possible span from the text.";
inline constexpr std::string_view kCopyExactlyReprompt = "Please copy the answer exactly from the given text.";
inline constexpr std::string_view kNotFromBackgroundReprompt =
    "Please answer from the given section not the given background description.";

inline constexpr std::string_view kCopyExactlyId = "copy_exactly";
inline constexpr std::string_view kNotFromBackgroundId = "not_from_background";

enum class Failure { NotASpan, CopiedFromBackground, TooLong };

const char* to_string(Failure f);

struct ValidationVerdict {
    bool valid = false;
    bool cannot_find = false;
    std::optional<Failure> failure;
    std::vector<AnswerSpan> matched_spans;
    /// The first segment that failed, for diagnostics.
    std::string failed_segment;
};

/// The teacher's zero-shot instruction with title, background, header and
/// section text substituted. `max_answer_tokens` only changes the number
/// quoted in the prompt; the default reproduces the canonical template.
std::string build_teacher_instruction(const TopicContext& ctx, int max_answer_tokens = 40);

/// The message actually sent for a question (question, then the reminder
/// when enabled, separated by one space).
std::string question_message(std::string_view question, const TeacherConfig& cfg);

chat::ChatSession open_session(const chat::ChatBackend& backend, const TopicContext& ctx,
                               const TeacherConfig& cfg, chat::ChatParams params = {});

std::string generate_answer(chat::ChatBackend& backend, chat::ChatSession& session, std::string_view question,
                            const TeacherConfig& cfg);

/// Splits on "; " only.
std::vector<std::string> split_answer_pieces(std::string_view raw);
/// Splits a piece after '.', '!' or '?' followed by whitespace; punctuation
/// stays with its sentence.
std::vector<std::string> split_sentences(std::string_view piece);

/// Reusable validator for one context; builds the normalized views once.
class AnswerValidator {
public:
    AnswerValidator(const TopicContext& ctx, const TeacherConfig& cfg);

    ValidationVerdict validate(std::string_view raw) const;

private:
    struct SegmentResult {
        std::optional<Failure> failure;
        std::optional<text::CharInterval> interval;
    };
    SegmentResult check_segment(std::string_view segment, bool enforce_length) const;
    bool too_long(std::string_view segment) const;

    const TopicContext& ctx_;
    TeacherConfig cfg_;
    text::SpanLocator section_;
    std::optional<text::SpanLocator> background_;
};

ValidationVerdict validate_answer(std::string_view raw, const TopicContext& ctx, const TeacherConfig& cfg);

/// Throws std::logic_error for a valid verdict.
std::string_view select_teacher_reprompt(const ValidationVerdict& verdict);
std::string_view reprompt_id(std::string_view reprompt);

struct TeacherOutcome {
    Answer answer;
    std::vector<std::string> reprompts;
    int backend_calls = 0;
};

/// Generate, validate, reprompt; at most `patience` reprompts. Falls back to
/// CannotFind with attempts == patience + 1 when patience runs out.
TeacherOutcome answer_with_validation(chat::ChatBackend& backend, chat::ChatSession& session,
                                      std::string_view question, const TopicContext& ctx,
                                      const TeacherConfig& cfg);

} // namespace cqasim::teacher
