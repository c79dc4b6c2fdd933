#include "cqasim/teacher.hpp"

#include <stdexcept>

namespace cqasim::teacher {

const char* to_string(Failure f)
{
    switch (f) {
    case Failure::NotASpan:
        return "NotASpan";
    case Failure::CopiedFromBackground:
        return "CopiedFromBackground";
    case Failure::TooLong:
        return "TooLong";
    }
    return "unknown";
}

std::string build_teacher_instruction(const TopicContext& ctx, int max_answer_tokens)
{
    std::string out;
    out += "Topic: " + ctx.title + "\n";
    out += "Background knowledge " + ctx.background + "\n\n";
    out += "In this task, you will be given a text about the topic explained above. "
           "You will answer my questions from this text.  "
           "Please remember that you cannot generate the answer on your own but should only copy a "
           "continuous span from the original text and the copied answer should not exceed ";
    out += std::to_string(max_answer_tokens);
    out += " tokens.  If you cannot find the answer in the text, please generate ‘I cannot find the "
           "answer’.\n\n";
    out += "Section header: " + ctx.section_header + "\n";
    out += "Section text: " + ctx.section_text;
    return out;
}

std::string question_message(std::string_view question, const TeacherConfig& cfg)
{
    std::string msg(question);
    if (cfg.shortest_span_reminder) {
        msg += ' ';
        msg += kShortestSpanReminder;
    }
    return msg;
}

chat::ChatSession open_session(const chat::ChatBackend& backend, const TopicContext& ctx,
                               const TeacherConfig& cfg, chat::ChatParams params)
{
    return chat::ChatSession::open(backend.id(), ctx.id + "/teacher",
                                   build_teacher_instruction(ctx, cfg.max_answer_tokens), params);
}

std::string generate_answer(chat::ChatBackend& backend, chat::ChatSession& session, std::string_view question,
                            const TeacherConfig& cfg)
{
    return chat::complete(backend, session, question_message(question, cfg));
}

std::vector<std::string> split_answer_pieces(std::string_view raw)
{
    std::vector<std::string> out;
    std::size_t from = 0;
    while (true) {
        const auto at = raw.find("; ", from);
        const auto piece = text::trim(raw.substr(from, at == std::string_view::npos ? raw.npos : at - from));
        if (!piece.empty())
            out.emplace_back(piece);
        if (at == std::string_view::npos)
            break;
        from = at + 2;
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view piece)
{
    std::vector<std::string> out;
    std::size_t from = 0;
    for (std::size_t i = 0; i + 1 < piece.size(); ++i) {
        const char c = piece[i];
        if ((c == '.' || c == '!' || c == '?') && text::is_space(piece[i + 1])) {
            const auto s = text::trim(piece.substr(from, i + 1 - from));
            if (!s.empty())
                out.emplace_back(s);
            from = i + 1;
        }
    }
    const auto tail = text::trim(piece.substr(from));
    if (!tail.empty())
        out.emplace_back(tail);
    return out;
}

AnswerValidator::AnswerValidator(const TopicContext& ctx, const TeacherConfig& cfg)
    : ctx_(ctx)
    , cfg_(cfg)
    , section_(ctx.section_text)
{
    if (!text::trim(ctx.background).empty())
        background_.emplace(ctx.background);
}

bool AnswerValidator::too_long(std::string_view segment) const
{
    return text::word_count(segment) > static_cast<std::size_t>(cfg_.max_answer_tokens);
}

AnswerValidator::SegmentResult AnswerValidator::check_segment(std::string_view segment, bool enforce_length) const
{
    if (auto m = section_.find(segment)) {
        if (enforce_length && too_long(segment))
            return {Failure::TooLong, std::nullopt};
        return {std::nullopt, m->interval};
    }
    if (background_ && background_->find(segment))
        return {Failure::CopiedFromBackground, std::nullopt};
    return {Failure::NotASpan, std::nullopt};
}

ValidationVerdict AnswerValidator::validate(std::string_view raw) const
{
    ValidationVerdict v;
    if (is_cannot_find_phrase(raw)) {
        v.valid = true;
        v.cannot_find = true;
        return v;
    }
    const auto pieces = split_answer_pieces(raw);
    if (pieces.empty()) {
        v.failure = Failure::NotASpan;
        return v;
    }

    auto fail = [&](Failure f, std::string_view segment) {
        v.valid = false;
        v.failure = f;
        v.failed_segment = std::string(segment);
        v.matched_spans.clear();
        return v;
    };
    auto push_span = [&](const text::CharInterval& iv) {
        v.matched_spans.push_back(
            {text::substr_codepoints(ctx_.section_text, iv.start, iv.end), iv.start, iv.end});
    };

    for (const auto& piece : pieces) {
        const auto sentences = split_sentences(piece);
        // A piece that is itself contiguous in the section is one span; the
        // length cap still applies sentence by sentence.
        if (auto whole = section_.find(piece)) {
            for (const auto& s : sentences)
                if (too_long(s))
                    return fail(Failure::TooLong, s);
            push_span(whole->interval);
            continue;
        }
        if (sentences.size() <= 1) {
            const auto r = check_segment(piece, true);
            return fail(*r.failure, piece);
        }
        std::optional<text::CharInterval> open;
        for (const auto& s : sentences) {
            const auto r = check_segment(s, true);
            if (r.failure)
                return fail(*r.failure, s);
            const auto iv = *r.interval;
            // Sentences that sit next to each other in the section form one span.
            if (open && iv.start >= open->end &&
                text::trim(text::substr_codepoints(ctx_.section_text, open->end, iv.start)).empty()) {
                open->end = iv.end;
                continue;
            }
            if (open)
                push_span(*open);
            open = iv;
        }
        if (open)
            push_span(*open);
    }
    v.valid = true;
    return v;
}

ValidationVerdict validate_answer(std::string_view raw, const TopicContext& ctx, const TeacherConfig& cfg)
{
    return AnswerValidator(ctx, cfg).validate(raw);
}

std::string_view select_teacher_reprompt(const ValidationVerdict& verdict)
{
    if (verdict.valid || !verdict.failure)
        throw std::logic_error("select_teacher_reprompt called with a valid verdict");
    switch (*verdict.failure) {
    case Failure::CopiedFromBackground:
        return kNotFromBackgroundReprompt;
    case Failure::NotASpan:
    case Failure::TooLong:
        return kCopyExactlyReprompt;
    }
    return kCopyExactlyReprompt;
}

std::string_view reprompt_id(std::string_view reprompt)
{
    return reprompt == kNotFromBackgroundReprompt ? kNotFromBackgroundId : kCopyExactlyId;
}

TeacherOutcome answer_with_validation(chat::ChatBackend& backend, chat::ChatSession& session,
                                      std::string_view question, const TopicContext& ctx,
                                      const TeacherConfig& cfg)
{
    cfg.validate();
    const AnswerValidator validator(ctx, cfg);
    TeacherOutcome out;

    out.backend_calls = 1;
    auto raw = generate_answer(backend, session, question, cfg);
    while (true) {
        const auto verdict = validator.validate(raw);
        if (verdict.valid) {
            out.answer = verdict.cannot_find ? Answer::cannot_find(out.backend_calls)
                                             : Answer::found(verdict.matched_spans, raw, out.backend_calls);
            return out;
        }
        if (out.reprompts.size() >= static_cast<std::size_t>(cfg.patience)) {
            out.answer = Answer::cannot_find(out.backend_calls);
            return out;
        }
        const auto reprompt = select_teacher_reprompt(verdict);
        out.reprompts.emplace_back(reprompt_id(reprompt));
        ++out.backend_calls;
        raw = chat::complete(backend, session, reprompt);
    }
}

} // namespace cqasim::teacher
