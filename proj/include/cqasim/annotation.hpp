#pragma once

#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cqasim::annotation {

enum class Aspect { Correctness, Naturalness, Completeness, Preference };
enum class Choice { A, B, Neither, Both };
enum class System { System1, System2 };

const char* to_string(Aspect a);
const char* to_string(Choice c);
std::optional<Aspect> aspect_from_string(std::string_view s);
std::optional<Choice> choice_from_string(std::string_view s);

/// The three per-item aspects, in display order.
const std::array<Aspect, 3>& item_aspects();

struct TaskItem {
    std::string question;
    Answer answer_a;
    Answer answer_b;
    std::vector<Aspect> judgeable;
    std::vector<text::CharInterval> highlights_a;
    std::vector<text::CharInterval> highlights_b;

    bool judgeable_on(Aspect a) const;
    friend bool operator==(const TaskItem&, const TaskItem&) = default;
};

struct ComparisonTask {
    std::string id;
    TopicContext context;
    std::vector<TaskItem> items;
    /// Hidden assignment: true when System A shows ds1 (system1).
    bool a_is_system1 = true;

    /// Un-blinds a choice; Neither and Both map to nothing.
    std::optional<System> system_for(Choice c) const;
    friend bool operator==(const ComparisonTask&, const ComparisonTask&) = default;
};

/// Aspects an item may be judged on: none for identical answers, only
/// correctness when exactly one side is CannotFind, otherwise all three.
std::vector<Aspect> judgeable_aspects(const Answer& a, const Answer& b);

/// One task per conversation present in both datasets, in ds1 order.
/// Throws metrics::PairMismatch when turn counts or questions differ.
std::vector<ComparisonTask> build_tasks(const Dataset& ds1, const Dataset& ds2, std::mt19937_64& rng);

/// Annotator-facing view: no assignment, no dataset names.
nlohmann::json blinded_json(const ComparisonTask& task);

/// Full record including the assignment, for persistence.
nlohmann::json task_to_json(const ComparisonTask& task);
ComparisonTask task_from_json(const nlohmann::json& j);

// --- onboarding -------------------------------------------------------------

struct QuizQuestion {
    std::string id;
    std::string prompt;
    std::vector<std::string> options;
    std::string answer;
};

struct Quiz {
    std::vector<QuizQuestion> questions;
    /// Failed attempts allowed before the annotator is locked out.
    int max_attempts = 1;

    std::vector<std::string> key() const;
    nlohmann::json public_json() const;
    static Quiz from_json(const nlohmann::json& j);
    static Quiz from_file(const std::filesystem::path& path);
};

/// True iff at least 75% of `key` is answered correctly, position by
/// position. Answers compare after trimming, ignoring ASCII case.
bool gate_onboarding(const std::vector<std::string>& responses, const std::vector<std::string>& key);

// --- judgments and aggregation -----------------------------------------------

struct Judgment {
    std::string annotator;
    std::string task_id;
    /// nullopt for the conversation-level preference.
    std::optional<std::size_t> item;
    Aspect aspect = Aspect::Correctness;
    Choice choice = Choice::Neither;
    std::string justification;
    std::uint64_t sequence = 0;

    friend bool operator==(const Judgment&, const Judgment&) = default;
};

nlohmann::json judgment_to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& j);

class InsufficientAnnotators : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fleiss' kappa over a count matrix (items x categories). Items may have
/// different rater counts; items with fewer than two ratings are ignored.
/// Returns 1.0 when every rating falls in one category. Throws
/// std::invalid_argument when no item has two ratings.
double fleiss_kappa(const std::vector<std::array<std::size_t, 4>>& counts);

/// Majority outcome of one unit: a system wins with a strict majority.
std::optional<System> majority(const std::vector<std::optional<System>>& votes);

struct AspectRow {
    std::size_t n = 0;
    std::size_t system1 = 0;
    std::size_t system2 = 0;
    std::size_t tie = 0;

    double system1_pct() const;
    double system2_pct() const;
    double tie_pct() const;
};

struct AggregateResult {
    /// Majority-vote outcome per unit, one row per aspect.
    std::map<Aspect, AspectRow> majority;
    /// Every individual judgment counted once; Neither and Both count as tie.
    std::map<Aspect, AspectRow> per_annotator;
    /// Over per-item aspects; nullopt when nothing was rated twice.
    std::optional<double> kappa;
    std::size_t n_annotators_per_task = 0;
    std::size_t tasks = 0;
    /// Units skipped for having fewer than the required annotators.
    std::size_t pending_units = 0;
};

nlohmann::json aggregate_to_json(const AggregateResult& r, const std::string& system1_name,
                                 const std::string& system2_name);

/// Aggregates one task. Every judgeable unit needs `min_annotators` distinct
/// annotators, or InsufficientAnnotators is thrown.
AggregateResult aggregate(const ComparisonTask& task, const std::vector<Judgment>& judgments,
                          std::size_t min_annotators = 3);

/// Aggregates all tasks, skipping units below `min_annotators`.
AggregateResult aggregate_all(const std::vector<ComparisonTask>& tasks, const std::vector<Judgment>& judgments,
                              std::size_t min_annotators = 3);

// --- service state ----------------------------------------------------------

class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, std::string code, const std::string& message)
        : std::runtime_error(message)
        , status_(status)
        , code_(std::move(code))
    {
    }
    int status() const { return status_; }
    const std::string& code() const { return code_; }

private:
    int status_;
    std::string code_;
};

struct OnboardingOutcome {
    bool passed = false;
    std::size_t correct = 0;
    std::size_t total = 0;
    int attempts = 0;
};

/// Thread-safe annotation state. Every accepted event is appended to the log
/// file (when given) before it becomes visible; the log is replayed on start.
class AnnotationStore {
public:
    AnnotationStore(std::vector<ComparisonTask> tasks, Quiz quiz,
                    std::optional<std::filesystem::path> log_path = std::nullopt);

    const std::vector<ComparisonTask>& tasks() const { return tasks_; }
    const ComparisonTask* task(std::string_view id) const;
    const Quiz& quiz() const { return quiz_; }

    OnboardingOutcome submit_onboarding(const std::string& annotator, const std::vector<std::string>& responses);
    bool is_gated(const std::string& annotator) const;

    /// First task the annotator has not finished, or nullptr.
    const ComparisonTask* next_task(const std::string& annotator) const;

    /// Throws ServiceError: 403 ungated, 404 unknown task, 409 duplicate,
    /// 422 aspect not judgeable, 400 malformed (e.g. empty justification).
    Judgment submit(Judgment j);
    /// All-or-nothing.
    std::vector<Judgment> submit_batch(std::vector<Judgment> js);

    void flag(std::uint64_t sequence, const std::string& reason);
    std::map<std::uint64_t, std::string> flagged() const;

    std::vector<Judgment> judgments() const;
    AggregateResult report(std::size_t min_annotators = 3) const;
    std::string export_jsonl() const;

private:
    void check(const Judgment& j, const std::set<std::string>& pending) const;
    void append_log(const nlohmann::json& event);
    void apply(const nlohmann::json& event);

    std::vector<ComparisonTask> tasks_;
    Quiz quiz_;
    std::optional<std::filesystem::path> log_path_;
    std::ofstream log_;

    mutable std::mutex mu_;
    std::map<std::string, OnboardingOutcome> onboarding_;
    std::vector<Judgment> judgments_;
    std::set<std::string> keys_;
    std::map<std::uint64_t, std::string> flagged_;
    std::uint64_t next_sequence_ = 1;
};

} // namespace cqasim::annotation
