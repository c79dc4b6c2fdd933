#include "cqasim/student.hpp"
#include "cqasim/text.hpp"

#include <algorithm>
#include <cctype>

namespace cqasim::student {

namespace {

constexpr std::array<GuidingPrompt, 4> kPrompts{{
    {GuidingPromptId::General, "general", "Ask a general question and do not ask a too specific question."},
    {GuidingPromptId::WhStart, "wh_start", "Ask a question starting with where, when, or who."},
    {GuidingPromptId::Interesting, "interesting", "Ask a question about what is interesting in this article."},
    {GuidingPromptId::AnotherAspect, "another_aspect", "Ask a question about another aspect of the topic."},
}};

bool is_enumeration_token(std::string_view tok)
{
    if (tok.size() < 2)
        return false;
    const char last = tok.back();
    if (last != '.' && last != ')')
        return false;
    const auto digits = tok.substr(0, tok.size() - 1);
    return std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

} // namespace

const std::array<GuidingPrompt, 4>& guiding_prompts() { return kPrompts; }

const GuidingPrompt& guiding_prompt(GuidingPromptId id)
{
    return kPrompts[static_cast<std::size_t>(id)];
}

std::optional<GuidingPromptId> guiding_prompt_from_key(std::string_view key)
{
    for (const auto& p : kPrompts)
        if (p.key == key)
            return p.id;
    return std::nullopt;
}

std::string corrective_prompt(const StudentConfig& cfg)
{
    return "Please ask exactly one short question of at most " + std::to_string(cfg.max_question_words) +
           " words, on a single line.";
}

std::string build_student_instruction(const TopicContext& ctx)
{
    std::string out =
        "In this task, I am a teacher and have a document, you are a curious student who wants to explore "
        "this document by asking questions. The main objective is to learn most of the documents that I "
        "have. I will explain to you the topic and background knowledge of the document. Then I will give "
        "you the title of the document and you should ask questions about this title one by one. When you "
        "ask a question, I give you the answer, and then you ask your next question. I’m only allowed to "
        "find the answer to your questions from this document, so if I cannot find the answer, I will say "
        "“I cannot find the answer, please ask your next question”. You shouldn't ask questions that can "
        "be answered from my previous answers to your previous questions. You should sometimes ask "
        "follow-up questions from my previous answers.\n\n";
    out += "Topic: " + ctx.title + "\n";
    out += "Background knowledge " + ctx.background + "\n";
    out += "Please start asking question about: " + ctx.section_header;
    return out;
}

chat::ChatSession open_session(const chat::ChatBackend& backend, const TopicContext& ctx, chat::ChatParams params)
{
    return chat::ChatSession::open(backend.id(), ctx.id + "/student", build_student_instruction(ctx), params);
}

bool validate_question(std::string_view raw, const StudentConfig& cfg)
{
    if (raw.find('\n') != std::string_view::npos || raw.find('\r') != std::string_view::npos)
        return false;
    const auto words = text::split_whitespace(raw);
    if (words.empty() || words.size() > static_cast<std::size_t>(cfg.max_question_words))
        return false;
    return std::none_of(words.begin(), words.end(), is_enumeration_token);
}

StudentPrompt select_student_prompt(const Answer& prev_answer, PromptRng& rng)
{
    if (prev_answer.is_found())
        return {prev_answer.serialized(), std::nullopt};
    const auto& p = kPrompts[static_cast<std::size_t>(rng() % kPrompts.size())];
    std::string text(kCannotFindStimulus);
    text += ' ';
    text += p.text;
    return {std::move(text), p.id};
}

QuestionValidationExhausted::QuestionValidationExhausted(int attempts, std::string last_output)
    : std::runtime_error("no valid question after " + std::to_string(attempts) + " attempts")
    , attempts_(attempts)
    , last_output_(std::move(last_output))
{
}

StudentOutcome ask_with_validation(chat::ChatBackend& backend, chat::ChatSession& session,
                                   std::string_view stimulus, const StudentConfig& cfg)
{
    cfg.validate();
    StudentOutcome out;
    auto raw = chat::complete(backend, session, stimulus);
    out.attempts = 1;
    while (true) {
        const auto candidate = text::trim(raw);
        if (validate_question(candidate, cfg)) {
            out.question = std::string(candidate);
            return out;
        }
        if (out.attempts >= cfg.max_regen_attempts)
            throw QuestionValidationExhausted(out.attempts, raw);
        out.corrections.emplace_back(kShortQuestionCorrectionId);
        raw = chat::complete(backend, session, corrective_prompt(cfg));
        ++out.attempts;
    }
}

} // namespace cqasim::student
