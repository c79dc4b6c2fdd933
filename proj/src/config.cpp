#include "cqasim/config.hpp"

#include <stdexcept>

namespace cqasim {

void TeacherConfig::validate() const
{
    if (patience < 1)
        throw std::invalid_argument("teacher patience must be >= 1");
    if (max_answer_tokens < 1)
        throw std::invalid_argument("teacher max_answer_tokens must be >= 1");
}

void StudentConfig::validate() const
{
    if (max_question_words < 1)
        throw std::invalid_argument("student max_question_words must be >= 1");
    if (max_regen_attempts < 1)
        throw std::invalid_argument("student max_regen_attempts must be >= 1");
}

void SimulationConfig::validate() const
{
    if (max_turns < 1)
        throw std::invalid_argument("max_turns must be >= 1");
    if (stop_on_consecutive_cannotfind < 0)
        throw std::invalid_argument("stop_on_consecutive_cannotfind must be >= 0");
    teacher.validate();
    student.validate();
}

void to_json(nlohmann::json& j, const TeacherConfig& c)
{
    j = {{"patience", c.patience},
         {"max_answer_tokens", c.max_answer_tokens},
         {"shortest_span_reminder", c.shortest_span_reminder}};
}

void from_json(const nlohmann::json& j, TeacherConfig& c)
{
    c = TeacherConfig{};
    c.patience = j.value("patience", c.patience);
    c.max_answer_tokens = j.value("max_answer_tokens", c.max_answer_tokens);
    c.shortest_span_reminder = j.value("shortest_span_reminder", c.shortest_span_reminder);
}

void to_json(nlohmann::json& j, const StudentConfig& c)
{
    j = {{"max_question_words", c.max_question_words},
         {"max_regen_attempts", c.max_regen_attempts},
         {"guiding_prompt_seed", c.guiding_prompt_seed}};
}

void from_json(const nlohmann::json& j, StudentConfig& c)
{
    c = StudentConfig{};
    c.max_question_words = j.value("max_question_words", c.max_question_words);
    c.max_regen_attempts = j.value("max_regen_attempts", c.max_regen_attempts);
    c.guiding_prompt_seed = j.value("guiding_prompt_seed", c.guiding_prompt_seed);
}

void to_json(nlohmann::json& j, const SimulationConfig& c)
{
    j = {{"max_turns", c.max_turns},
         {"teacher", c.teacher},
         {"student", c.student},
         {"seed", c.seed},
         {"stop_on_consecutive_cannotfind", c.stop_on_consecutive_cannotfind}};
}

void from_json(const nlohmann::json& j, SimulationConfig& c)
{
    c = SimulationConfig{};
    c.max_turns = j.value("max_turns", c.max_turns);
    if (j.contains("teacher"))
        c.teacher = j.at("teacher").get<TeacherConfig>();
    if (j.contains("student"))
        c.student = j.at("student").get<StudentConfig>();
    c.seed = j.value("seed", c.seed);
    c.stop_on_consecutive_cannotfind =
        j.value("stop_on_consecutive_cannotfind", c.stop_on_consecutive_cannotfind);
}

} // namespace cqasim
