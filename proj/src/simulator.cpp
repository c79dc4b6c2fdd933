#include "cqasim/simulator.hpp"
#include "cqasim/student.hpp"
#include "cqasim/teacher.hpp"
#include "cqasim/text.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

namespace cqasim::sim {

using nlohmann::json;

const char* to_string(Termination t)
{
    switch (t) {
    case Termination::MaxTurns:
        return "MaxTurns";
    case Termination::StudentExhausted:
        return "StudentExhausted";
    case Termination::ConsecutiveCannotFind:
        return "ConsecutiveCannotFind";
    case Termination::BackendFailure:
        return "BackendFailure";
    }
    return "unknown";
}

std::optional<Termination> termination_from_string(std::string_view s)
{
    for (auto t : {Termination::MaxTurns, Termination::StudentExhausted, Termination::ConsecutiveCannotFind,
                   Termination::BackendFailure})
        if (s == to_string(t))
            return t;
    return std::nullopt;
}

SimulationReport simulate_conversation(const TopicContext& ctx, chat::ChatBackend& student_backend,
                                       chat::ChatBackend& teacher_backend, const SimulationConfig& cfg,
                                       chat::ChatParams params)
{
    cfg.validate();
    ctx.validate();

    SimulationReport rep;
    auto& conv = rep.conversation;
    conv.context = ctx;
    conv.config_snapshot = cfg;
    conv.seed = cfg.seed;
    conv.backend_id = student_backend.id() == teacher_backend.id()
                          ? student_backend.id()
                          : student_backend.id() + "|" + teacher_backend.id();

    student::PromptRng rng(cfg.seed ^ cfg.student.guiding_prompt_seed);
    auto student_session = student::open_session(student_backend, ctx, params);
    auto teacher_session = teacher::open_session(teacher_backend, ctx, cfg.teacher, params);

    int unanswered_run = 0;
    rep.termination = Termination::MaxTurns;
    try {
        for (int i = 0; i < cfg.max_turns; ++i) {
            std::string stimulus;
            std::optional<student::GuidingPromptId> guiding;
            if (i > 0) {
                auto p = student::select_student_prompt(conv.turns.back().answer, rng);
                stimulus = std::move(p.text);
                guiding = p.guiding;
            }

            student::StudentOutcome asked;
            try {
                asked = student::ask_with_validation(student_backend, student_session, stimulus, cfg.student);
            } catch (const student::QuestionValidationExhausted& e) {
                rep.backend_calls += static_cast<std::size_t>(e.attempts());
                rep.termination = Termination::StudentExhausted;
                rep.detail = e.what();
                break;
            }
            rep.backend_calls += static_cast<std::size_t>(asked.attempts);

            auto answered =
                teacher::answer_with_validation(teacher_backend, teacher_session, asked.question, ctx, cfg.teacher);
            rep.backend_calls += static_cast<std::size_t>(answered.backend_calls);

            Turn turn;
            turn.index = conv.turns.size();
            turn.id = ctx.id + "_q#" + std::to_string(turn.index);
            turn.question = std::move(asked.question);
            turn.answer = std::move(answered.answer);
            if (guiding)
                turn.student_prompt_used = std::string(student::guiding_prompt(*guiding).key);
            turn.teacher_reprompts = std::move(answered.reprompts);
            turn.student_attempts = asked.attempts;
            turn.student_corrections = std::move(asked.corrections);
            const bool found = turn.answer.is_found();
            conv.turns.push_back(std::move(turn));

            unanswered_run = found ? 0 : unanswered_run + 1;
            if (cfg.stop_on_consecutive_cannotfind > 0 && unanswered_run >= cfg.stop_on_consecutive_cannotfind) {
                rep.termination = Termination::ConsecutiveCannotFind;
                break;
            }
        }
    } catch (const chat::ChatError& e) {
        ++rep.backend_calls;
        rep.termination = Termination::BackendFailure;
        rep.detail = e.what();
    }
    conv.termination = to_string(rep.termination);
    return rep;
}

SimulationReport simulate_conversation(const TopicContext& ctx, chat::ChatBackend& backend,
                                       const SimulationConfig& cfg, chat::ChatParams params)
{
    return simulate_conversation(ctx, backend, backend, cfg, params);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view context_id)
{
    return seed ^ text::stable_hash(context_id);
}

std::string file_stem(std::string_view context_id)
{
    std::string out;
    bool changed = context_id.empty();
    for (const char c : context_id) {
        const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        out.push_back(safe ? c : '_');
        changed |= !safe;
    }
    if (out.empty() || out.front() == '.')
        changed = true;
    if (changed) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(text::stable_hash(context_id)));
        out += "-";
        out += buf;
    }
    return out;
}

namespace {

struct Paths {
    std::filesystem::path record, trace, report;
};

Paths paths_for(const std::filesystem::path& dir, const std::string& context_id)
{
    const auto stem = file_stem(context_id);
    const auto base = dir / "conversations";
    return {base / (stem + ".json"), base / (stem + ".trace.jsonl"), base / (stem + ".report.json")};
}

json report_json(const SimulationReport& r)
{
    return {{"context_id", r.conversation.id()},
            {"seed", r.conversation.seed},
            {"termination", to_string(r.termination)},
            {"backend_calls", r.backend_calls},
            {"turns", r.conversation.turns.size()},
            {"detail", r.detail}};
}

std::optional<SimulationReport> try_reuse(const Paths& p, const std::string& context_id)
{
    std::error_code ec;
    if (!std::filesystem::exists(p.record, ec) || !std::filesystem::exists(p.report, ec))
        return std::nullopt;
    const auto report = json::parse(read_file(p.report));
    const auto termination = termination_from_string(report.value("termination", std::string{}));
    if (!termination || *termination == Termination::BackendFailure)
        return std::nullopt;
    auto ds = load_quac(p.record);
    const auto* conv = ds.find(context_id);
    if (!conv)
        return std::nullopt;
    SimulationReport r;
    r.conversation = *conv;
    r.termination = *termination;
    r.backend_calls = report.value("backend_calls", std::size_t{0});
    r.detail = report.value("detail", std::string{});
    return r;
}

} // namespace

BatchResult run_batch(const std::vector<TopicContext>& contexts, chat::ChatBackend& student_backend,
                      chat::ChatBackend& teacher_backend, const SimulationConfig& cfg, const BatchOptions& options)
{
    if (options.parallelism < 1)
        throw std::invalid_argument("parallelism must be >= 1");
    cfg.validate();

    const auto n = contexts.size();
    std::vector<std::optional<SimulationReport>> slots(n);
    std::vector<std::optional<std::string>> failures(n);
    std::vector<bool> reused(n, false);

    auto work = [&](std::size_t i) {
        const auto& ctx = contexts[i];
        try {
            std::optional<Paths> paths;
            if (options.out_dir) {
                paths = paths_for(*options.out_dir, ctx.id);
                if (!options.force) {
                    if (auto r = try_reuse(*paths, ctx.id)) {
                        slots[i] = std::move(*r);
                        reused[i] = true;
                        return;
                    }
                }
            }
            auto local = cfg;
            local.seed = derive_seed(cfg.seed, ctx.id);
            auto r = simulate_conversation(ctx, student_backend, teacher_backend, local, options.params);
            r.conversation.config_snapshot = cfg;
            if (paths) {
                write_file_atomic(paths->record,
                                  dataset_to_json(Dataset{options.dataset_name, {r.conversation}}).dump(1) + "\n");
                write_file_atomic(paths->trace, trace_lines(r.conversation));
                write_file_atomic(paths->report, report_json(r).dump(1) + "\n");
            }
            if (r.termination == Termination::BackendFailure)
                failures[i] = r.detail;
            slots[i] = std::move(r);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    };

    if (options.parallelism == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        const auto workers = std::min(options.parallelism, n);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto i = next++; i < n; i = next++)
                    work(i);
            });
    }

    BatchResult out;
    out.dataset.name = options.dataset_name;
    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["config"] = cfg;
    manifest["contexts"] = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i])
            out.errors.push_back({contexts[i].id, *failures[i]});
        if (!slots[i]) {
            manifest["contexts"].push_back(
                {{"context_id", contexts[i].id}, {"termination", nullptr}, {"detail", *failures[i]}});
            continue;
        }
        if (reused[i])
            out.reused.push_back(contexts[i].id);
        manifest["contexts"].push_back(report_json(*slots[i]));
        out.dataset.conversations.push_back(slots[i]->conversation);
        out.reports.push_back(std::move(*slots[i]));
    }

    if (options.out_dir) {
        export_dataset(out.dataset, *options.out_dir / "dataset.json");
        export_trace(out.dataset, *options.out_dir / "trace.jsonl");
        write_file_atomic(*options.out_dir / "manifest.json", manifest.dump(1) + "\n");
    }
    return out;
}

} // namespace cqasim::sim
