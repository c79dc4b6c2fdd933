#pragma once

#include "cqasim/chat.hpp"
#include "cqasim/config.hpp"
#include "cqasim/corpus.hpp"

#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cqasim::student {

/// Stimulus sent to the student after an unanswerable question, before the
/// guiding prompt.
inline constexpr std::string_view kCannotFindStimulus = "I cannot find the answer, please ask your next question.";
inline constexpr std::string_view kShortQuestionCorrectionId = "short_question";

enum class GuidingPromptId { General, WhStart, Interesting, AnotherAspect };

struct GuidingPrompt {
    GuidingPromptId id;
    std::string_view key;
    std::string_view text;
};

const std::array<GuidingPrompt, 4>& guiding_prompts();
const GuidingPrompt& guiding_prompt(GuidingPromptId id);
std::optional<GuidingPromptId> guiding_prompt_from_key(std::string_view key);

/// "Please ask exactly one short question of at most 25 words, on a single line."
std::string corrective_prompt(const StudentConfig& cfg);

/// Built from title, background and header only; the section text never
/// reaches the student.
std::string build_student_instruction(const TopicContext& ctx);

chat::ChatSession open_session(const chat::ChatBackend& backend, const TopicContext& ctx,
                               chat::ChatParams params = {});

/// Word cap, no line breaks, no enumeration markers ("1." or "2)" as a token).
bool validate_question(std::string_view raw, const StudentConfig& cfg);

using PromptRng = std::mt19937_64;

struct StudentPrompt {
    std::string text;
    std::optional<GuidingPromptId> guiding;
};

/// Found: the teacher's serialized answer. CannotFind: the unanswerable
/// stimulus plus one guiding prompt drawn uniformly from `rng`.
StudentPrompt select_student_prompt(const Answer& prev_answer, PromptRng& rng);

class QuestionValidationExhausted : public std::runtime_error {
public:
    QuestionValidationExhausted(int attempts, std::string last_output);
    int attempts() const { return attempts_; }
    const std::string& last_output() const { return last_output_; }

private:
    int attempts_;
    std::string last_output_;
};

struct StudentOutcome {
    std::string question;
    int attempts = 1;
    std::vector<std::string> corrections;
};

/// Sends `stimulus` (empty on the opening turn) and regenerates with the
/// corrective prompt until a question validates, for at most
/// max_regen_attempts generations in total.
StudentOutcome ask_with_validation(chat::ChatBackend& backend, chat::ChatSession& session,
                                   std::string_view stimulus, const StudentConfig& cfg);

} // namespace cqasim::student
