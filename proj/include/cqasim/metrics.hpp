#pragma once

#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cqasim::metrics {

class SpanNotLocatable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedCorrelation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownQuestionId : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PairMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- span location and coverage --------------------------------------------

/// Character intervals of a Found answer inside the section text. Stored
/// offsets that reproduce the span text exactly are taken as-is; otherwise
/// the span is searched with the teacher's normalization ladder.
std::vector<text::CharInterval> locate_spans(const Answer& answer, const TopicContext& ctx);

/// |union of answered intervals| / |section_text|, in code points.
double topic_coverage(const Conversation& conv);

struct CoverageResult {
    std::vector<std::pair<std::string, double>> per_conversation;
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

CoverageResult coverage(const Dataset& ds);

// --- conversation flow ------------------------------------------------------

/// Kendall's tau-b in O(n log n) (Knight's algorithm). Throws
/// UndefinedCorrelation for n < 2 or when either side is constant.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Tau between the conversation order of answered turns and the document
/// order of their first-span starts.
double conversation_flow_krcc(const Conversation& conv);

struct FlowEntry {
    std::string conversation_id;
    double tau = 0.0;
    std::size_t n = 0;
};

struct FlowResult {
    std::vector<FlowEntry> per_conversation;
    double mean = 0.0;
    /// Conversations with fewer than two answered turns or constant offsets.
    std::size_t excluded = 0;
};

FlowResult conversation_flow(const Dataset& ds);

// --- token-level QA scores --------------------------------------------------

struct TokenScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool em = false;
};

/// Lowercase, strip ASCII punctuation, drop "a"/"an"/"the", collapse spaces.
std::string normalize_answer(std::string_view s);
std::vector<std::string> answer_tokens(std::string_view s);

/// nullopt stands for CannotFind on either side.
TokenScore score_text(const std::optional<std::string>& predicted, const std::optional<std::string>& gold);
TokenScore token_score(const Answer& predicted, const Answer& gold);

struct ScoreTable {
    std::size_t n_questions = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double em = 0.0;
    std::vector<std::string> missing;
};

/// question id -> predicted text, or nullopt for CannotFind.
using Predictions = std::map<std::string, std::optional<std::string>>;

/// Line-delimited {question_id, answer_text} records; a JSON object mapping
/// ids to texts is accepted too. "CANNOTANSWER", the CannotFind phrase, or
/// "cannot_answer": true mark unanswerable predictions.
Predictions load_predictions(const std::filesystem::path& path);

/// Macro-average over every question in `ds`; missing predictions score zero.
ScoreTable score_predictions(const Dataset& ds, const Predictions& predictions);

// --- answer pair comparison -------------------------------------------------

enum class OverlapClass { Same, Overlap, Different };

const char* to_string(OverlapClass c);

OverlapClass classify_answer_pair(const Answer& a, const Answer& b);

struct PairStats {
    std::size_t total = 0;
    std::map<OverlapClass, std::size_t> by_class;
    /// (class, condition) -> count, conditions as in the teacher comparison
    /// table: "a=None,b!=None", "b=None,a!=None", "both None", "b single",
    /// "b not single".
    std::map<std::pair<OverlapClass, std::string>, std::size_t> by_condition;
    std::size_t b_multi_span = 0;

    double percent(OverlapClass c) const;
};

/// Pairs conversations by id and turns by position; question texts must agree.
PairStats pair_stats(const Dataset& a, const Dataset& b);

// --- dataset statistics -----------------------------------------------------

struct DatasetStats {
    std::size_t n_conversations = 0;
    std::size_t n_questions = 0;
    std::size_t n_answered = 0;
    double avg_answer_length = 0.0;
    double avg_answers_per_question = 0.0;
};

DatasetStats dataset_stats(const Dataset& ds);

// --- helpers for reports ----------------------------------------------------

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_two_tailed = 1.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
};

/// Welch's unequal-variance t-test; needs at least two samples per side.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;

    std::string csv() const;
};

/// Equal-width bins over [lo, hi]; the last bin is closed.
Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

double mean(std::span<const double> v);
double population_std(std::span<const double> v);
double sample_variance(std::span<const double> v);

} // namespace cqasim::metrics
