#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace cqasim {

struct TeacherConfig {
    int patience = 4;
    int max_answer_tokens = 40;
    bool shortest_span_reminder = true;

    void validate() const;
    friend bool operator==(const TeacherConfig&, const TeacherConfig&) = default;
};

struct StudentConfig {
    int max_question_words = 25;
    int max_regen_attempts = 4;
    std::uint64_t guiding_prompt_seed = 0;

    void validate() const;
    friend bool operator==(const StudentConfig&, const StudentConfig&) = default;
};

struct SimulationConfig {
    int max_turns = 12;
    TeacherConfig teacher;
    StudentConfig student;
    std::uint64_t seed = 0;
    int stop_on_consecutive_cannotfind = 3; // 0 disables

    void validate() const;
    friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

void to_json(nlohmann::json& j, const TeacherConfig& c);
void from_json(const nlohmann::json& j, TeacherConfig& c);
void to_json(nlohmann::json& j, const StudentConfig& c);
void from_json(const nlohmann::json& j, StudentConfig& c);
void to_json(nlohmann::json& j, const SimulationConfig& c);
void from_json(const nlohmann::json& j, SimulationConfig& c);

} // namespace cqasim
