#include "cqasim/teacher.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cqasim;
using namespace cqasim::teacher;

namespace {

TopicContext ada()
{
    return testing::context("ada",
                            "Lovelace was born (10 December 1815) in London. Her mother promoted her interest in "
                            "mathematics. In 1833 she met Charles Babbage. Babbage designed the Analytical Engine.",
                            "Ada Lovelace was an English mathematician and writer.");
}

} // namespace

TEST_CASE("teacher instruction template")
{
    auto ctx = ada();
    const auto s = build_teacher_instruction(ctx);
    const std::string expected =
        "Topic: Ada Lovelace\n"
        "Background knowledge Ada Lovelace was an English mathematician and writer.\n\n"
        "In this task, you will be given a text about the topic explained above. You will answer my questions "
        "from this text.  Please remember that you cannot generate the answer on your own but should only copy "
        "a continuous span from the original text and the copied answer should not exceed 40 tokens.  If you "
        "cannot find the answer in the text, please generate ‘I cannot find the answer’.\n\n"
        "Section header: Early life\n"
        "Section text: " +
        ctx.section_text;
    CHECK(s == expected);
    CHECK(question_message("Who?", TeacherConfig{}) ==
          "Who? Remember that you should select the shortest possible span from the text.");
    TeacherConfig no_reminder;
    no_reminder.shortest_span_reminder = false;
    CHECK(question_message("Who?", no_reminder) == "Who?");
}

TEST_CASE("answer splitting")
{
    CHECK(split_answer_pieces("a; b;c; ") == std::vector<std::string>{"a", "b;c"});
    CHECK(split_sentences("One. Two! Three? Four") == std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
    CHECK(split_sentences("v1.2 is out.") == std::vector<std::string>{"v1.2 is out."});
}

TEST_CASE("validation verdicts")
{
    const auto ctx = ada();
    const TeacherConfig cfg;
    SUBCASE("exact span")
    {
        const auto v = validate_answer("In 1833 she met Charles Babbage.", ctx, cfg);
        CHECK(v.valid);
        REQUIRE(v.matched_spans.size() == 1);
        CHECK(v.matched_spans[0].text == "In 1833 she met Charles Babbage.");
    }
    SUBCASE("parentheses dropped by the model")
    {
        const auto v = validate_answer("Lovelace was born in London", ctx, cfg);
        CHECK(v.valid);
        CHECK(v.matched_spans[0].text == "Lovelace was born (10 December 1815) in London");
    }
    SUBCASE("adjacent sentences merge into one span")
    {
        const auto v = validate_answer("In 1833 she met Charles Babbage. Babbage designed the Analytical Engine.",
                                       ctx, cfg);
        CHECK(v.valid);
        CHECK(v.matched_spans.size() == 1);
    }
    SUBCASE("non-adjacent sentences stay separate")
    {
        const auto v =
            validate_answer("Lovelace was born (10 December 1815) in London. In 1833 she met Charles Babbage.", ctx, cfg);
        CHECK(v.valid);
        CHECK(v.matched_spans.size() == 2);
    }
    SUBCASE("semicolon pieces")
    {
        const auto v = validate_answer("in London; Charles Babbage", ctx, cfg);
        CHECK(v.valid);
        REQUIRE(v.matched_spans.size() == 2);
        CHECK(v.matched_spans[1].text == "Charles Babbage");
    }
    SUBCASE("background copy")
    {
        const auto v = validate_answer("an English mathematician and writer", ctx, cfg);
        CHECK_FALSE(v.valid);
        CHECK(v.failure == Failure::CopiedFromBackground);
        CHECK(select_teacher_reprompt(v) == kNotFromBackgroundReprompt);
    }
    SUBCASE("paraphrase")
    {
        const auto v = validate_answer("She met Babbage in 1833.", ctx, cfg);
        CHECK(v.failure == Failure::NotASpan);
        CHECK(select_teacher_reprompt(v) == kCopyExactlyReprompt);
        CHECK(reprompt_id(select_teacher_reprompt(v)) == kCopyExactlyId);
    }
    SUBCASE("cannot find")
    {
        CHECK(validate_answer("I cannot find the answer.", ctx, cfg).cannot_find);
        CHECK(validate_answer("i cannot find the answer", ctx, cfg).cannot_find);
        CHECK(validate_answer("‘I cannot find the answer’", ctx, cfg).cannot_find);
        CHECK(validate_answer("\"I cannot find the answer.\"", ctx, cfg).cannot_find);
        CHECK_FALSE(validate_answer("I cannot find the answer here", ctx, cfg).cannot_find);
    }
    SUBCASE("valid verdicts have no reprompt")
    {
        CHECK_THROWS_AS(select_teacher_reprompt(validate_answer("Charles Babbage", ctx, cfg)), std::logic_error);
    }
}

TEST_CASE("length cap")
{
    std::string long_sentence;
    for (int i = 0; i < 41; ++i)
        long_sentence += "w" + std::to_string(i) + " ";
    long_sentence += "end.";
    const auto ctx = testing::context("long", "Short start. " + long_sentence);
    CHECK(validate_answer(long_sentence, ctx, TeacherConfig{}).failure == Failure::TooLong);
    TeacherConfig roomy;
    roomy.max_answer_tokens = 50;
    CHECK(validate_answer(long_sentence, ctx, roomy).valid);
}

TEST_CASE("patience loop")
{
    const auto ctx = ada();
    TeacherConfig cfg;

    SUBCASE("recovers after a reprompt")
    {
        chat::ScriptedBackend backend({"She met Babbage.", "an English mathematician", "Charles Babbage"});
        auto session = open_session(backend, ctx, cfg);
        const auto out = answer_with_validation(backend, session, "Who did she meet?", ctx, cfg);
        CHECK(out.answer.is_found());
        CHECK(out.answer.attempts == 3);
        CHECK(out.reprompts == std::vector<std::string>{"copy_exactly", "not_from_background"});
        CHECK(session.history[2].content == kCopyExactlyReprompt);
        CHECK(session.history[4].content == kNotFromBackgroundReprompt);
    }
    SUBCASE("falls back after patience runs out")
    {
        chat::ScriptedBackend backend({"nope one", "nope two", "nope three", "nope four", "nope five", "Charles Babbage"});
        auto session = open_session(backend, ctx, cfg);
        const auto out = answer_with_validation(backend, session, "Who?", ctx, cfg);
        CHECK_FALSE(out.answer.is_found());
        CHECK(out.answer.attempts == 5);
        CHECK(out.reprompts.size() == 4);
        CHECK(out.backend_calls == 5);
    }
    SUBCASE("patience zero is rejected")
    {
        cfg.patience = 0;
        chat::ScriptedBackend backend({"nope"});
        auto session = open_session(backend, ctx, cfg);
        CHECK_THROWS_AS(answer_with_validation(backend, session, "Who?", ctx, cfg), std::invalid_argument);
    }
}
