#include "cqasim/student.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cqasim;
using namespace cqasim::student;

TEST_CASE("student instruction hides the section text")
{
    const auto ctx = testing::context("s", "SECRET SECTION TEXT", "Some background.");
    const auto s = build_student_instruction(ctx);
    CHECK(s.find("SECRET") == std::string::npos);
    CHECK(s.find("curious student") != std::string::npos);
    CHECK(s.ends_with("Topic: Ada Lovelace\nBackground knowledge Some background.\n"
                      "Please start asking question about: Early life"));
    CHECK(s.find("“I cannot find the answer, please ask your next question”") != std::string::npos);
}

TEST_CASE("question validation")
{
    StudentConfig cfg;
    CHECK(validate_question("Where was she born?", cfg));
    CHECK_FALSE(validate_question("", cfg));
    CHECK_FALSE(validate_question("Where?\nWhen?", cfg));
    CHECK_FALSE(validate_question("1. Where was she born?", cfg));
    CHECK_FALSE(validate_question("Where was she born? 2) When?", cfg));
    CHECK(validate_question("What happened in 1815?", cfg));
    std::string many;
    for (int i = 0; i < 26; ++i)
        many += "word ";
    CHECK_FALSE(validate_question(many, cfg));
    cfg.max_question_words = 30;
    CHECK(validate_question(many, cfg));
}

TEST_CASE("prompt selection")
{
    const auto ctx = testing::context("s", "Alpha beta gamma.");
    PromptRng rng(7);
    const auto after_answer = select_student_prompt(testing::found(ctx, "beta"), rng);
    CHECK(after_answer.text == "beta");
    CHECK_FALSE(after_answer.guiding);

    std::map<GuidingPromptId, int> seen;
    for (int i = 0; i < 400; ++i) {
        const auto p = select_student_prompt(testing::cannot_find(), rng);
        REQUIRE(p.guiding);
        CHECK(p.text.starts_with(kCannotFindStimulus));
        CHECK(p.text.ends_with(guiding_prompt(*p.guiding).text));
        ++seen[*p.guiding];
    }
    CHECK(seen.size() == 4);

    PromptRng a(99), b(99);
    for (int i = 0; i < 20; ++i)
        CHECK(select_student_prompt(testing::cannot_find(), a).guiding ==
              select_student_prompt(testing::cannot_find(), b).guiding);

    for (const auto& p : guiding_prompts())
        CHECK(guiding_prompt_from_key(p.key) == p.id);
    CHECK_FALSE(guiding_prompt_from_key("nope"));
}

TEST_CASE("regeneration loop")
{
    const auto ctx = testing::context("s", "Alpha beta gamma.");
    StudentConfig cfg;

    SUBCASE("corrects a list of questions")
    {
        chat::ScriptedBackend backend({"1. Who? 2. When?", "  Who was she?  "});
        auto session = open_session(backend, ctx);
        const auto out = ask_with_validation(backend, session, "", cfg);
        CHECK(out.question == "Who was she?");
        CHECK(out.attempts == 2);
        CHECK(out.corrections == std::vector<std::string>{"short_question"});
        CHECK(session.history[2].content == corrective_prompt(cfg));
    }
    SUBCASE("gives up")
    {
        chat::ScriptedBackend backend({"1. a 2. b"});
        auto session = open_session(backend, ctx);
        try {
            ask_with_validation(backend, session, "", cfg);
            FAIL("expected exhaustion");
        } catch (const QuestionValidationExhausted& e) {
            CHECK(e.attempts() == cfg.max_regen_attempts);
            CHECK(e.last_output() == "1. a 2. b");
        }
    }
}
