#pragma once

#include "cqasim/chat.hpp"
#include "cqasim/config.hpp"
#include "cqasim/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cqasim::sim {

enum class Termination { MaxTurns, StudentExhausted, ConsecutiveCannotFind, BackendFailure };

const char* to_string(Termination t);
std::optional<Termination> termination_from_string(std::string_view s);

struct SimulationReport {
    Conversation conversation;
    Termination termination = Termination::MaxTurns;
    std::size_t backend_calls = 0;
    /// Set for BackendFailure and StudentExhausted.
    std::string detail;
};

/// Runs one student/teacher dialogue over `ctx`. The student and teacher may
/// share a backend; each gets its own session.
SimulationReport simulate_conversation(const TopicContext& ctx, chat::ChatBackend& student_backend,
                                       chat::ChatBackend& teacher_backend, const SimulationConfig& cfg,
                                       chat::ChatParams params = {});

SimulationReport simulate_conversation(const TopicContext& ctx, chat::ChatBackend& backend,
                                       const SimulationConfig& cfg, chat::ChatParams params = {});

/// seed XOR stable_hash(context id).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view context_id);

/// File-system-safe stem for a context id.
std::string file_stem(std::string_view context_id);

struct BatchOptions {
    std::size_t parallelism = 1;
    /// When set: per-conversation records and traces, a manifest, and the
    /// combined dataset/trace files are written here, and finished
    /// conversations found here are reused.
    std::optional<std::filesystem::path> out_dir;
    bool force = false;
    std::string dataset_name = "simulated";
    chat::ChatParams params;
};

struct BatchError {
    std::string context_id;
    std::string message;
};

struct BatchResult {
    Dataset dataset;
    std::vector<SimulationReport> reports;
    std::vector<BatchError> errors;
    std::vector<std::string> reused;
};

BatchResult run_batch(const std::vector<TopicContext>& contexts, chat::ChatBackend& student_backend,
                      chat::ChatBackend& teacher_backend, const SimulationConfig& cfg, const BatchOptions& options);

} // namespace cqasim::sim
