#include "cqasim/annotation.hpp"
#include "cqasim/annotation_server.hpp"
#include "cqasim/chat.hpp"
#include "cqasim/config.hpp"
#include "cqasim/corpus.hpp"
#include "cqasim/metrics.hpp"
#include "cqasim/simulator.hpp"
#include "cqasim/teacher.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace cqasim;
using nlohmann::json;

namespace {

// Data-level failure: exit status 1.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

OffsetUnit parse_unit(const std::string& s)
{
    return s == "token" ? OffsetUnit::Token : OffsetUnit::Character;
}

Dataset load(const std::string& path, const std::string& unit)
{
    return load_quac(path, LoadOptions{parse_unit(unit)});
}

std::string fixed(double v, int digits = 4)
{
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string contexts, out, backend = "remote", record, endpoint, model, api_key_env, name = "simulated";
    std::uint64_t seed = 0;
    int max_turns = 12;
    int patience = 4;
    std::size_t parallel = 1;
    bool force = false;
    double temperature = 1.0;
};

int run_simulate(const SimulateArgs& a)
{
    const auto source = load_quac(a.contexts);
    std::vector<TopicContext> contexts;
    for (const auto& c : source.conversations)
        contexts.push_back(c.context);

    SimulationConfig cfg;
    cfg.seed = a.seed;
    cfg.max_turns = a.max_turns;
    cfg.teacher.patience = a.patience;
    cfg.validate();

    std::unique_ptr<chat::ChatBackend> backend;
    if (a.backend == "remote") {
        chat::RemoteConfig rc;
        if (!a.endpoint.empty())
            rc.endpoint = a.endpoint;
        if (!a.model.empty())
            rc.model = a.model;
        if (!a.api_key_env.empty())
            rc.api_key_env = a.api_key_env;
        backend = std::make_unique<chat::RemoteBackend>(rc);
    } else if (a.backend.rfind("scripted:", 0) == 0) {
        backend = std::make_unique<chat::ScriptedBackend>(chat::ScriptedBackend::from_file(a.backend.substr(9)));
    } else {
        throw CLI::ValidationError("--backend", "expected 'remote' or 'scripted:<file>'");
    }
    std::optional<chat::RecordingBackend> recorder;
    chat::ChatBackend* active = backend.get();
    if (!a.record.empty()) {
        recorder.emplace(*backend);
        active = &*recorder;
    }

    sim::BatchOptions opts;
    opts.parallelism = a.parallel;
    opts.out_dir = a.out;
    opts.force = a.force;
    opts.dataset_name = a.name;
    opts.params.temperature = a.temperature;
    const auto result = sim::run_batch(contexts, *active, *active, cfg, opts);
    if (recorder)
        recorder->save(a.record);

    std::map<std::string, std::size_t> by_termination;
    std::size_t turns = 0;
    for (const auto& r : result.reports) {
        ++by_termination[sim::to_string(r.termination)];
        turns += r.conversation.turns.size();
    }
    std::cout << "conversations " << result.dataset.conversations.size() << " (reused " << result.reused.size()
              << ")\nquestions " << turns << '\n';
    for (const auto& [t, n] : by_termination)
        std::cout << "termination " << t << ' ' << n << '\n';
    for (const auto& e : result.errors)
        std::cerr << json{{"context_id", e.context_id}, {"error", e.message}}.dump() << '\n';
    return result.errors.empty() ? 0 : 1;
}

// --- validate ---------------------------------------------------------------

int run_validate(const std::string& path, const std::string& unit, int max_tokens)
{
    auto loaded = load_quac_collect(path, LoadOptions{parse_unit(unit)});
    std::size_t violations = 0;
    for (const auto& d : loaded.diagnostics) {
        std::cout << json{{"error", "load"}, {"detail", d}}.dump() << '\n';
        ++violations;
    }
    TeacherConfig tcfg;
    tcfg.max_answer_tokens = max_tokens;
    std::size_t checked = 0;
    for (const auto& conv : loaded.dataset.conversations) {
        teacher::AnswerValidator validator(conv.context, tcfg);
        for (const auto& t : conv.turns) {
            if (!t.answer.is_found())
                continue;
            ++checked;
            const auto verdict = validator.validate(t.answer.serialized());
            if (verdict.valid)
                continue;
            ++violations;
            std::cout << json{{"error", "span"},
                              {"conversation", conv.id()},
                              {"question_id", t.id},
                              {"failure", verdict.failure ? teacher::to_string(*verdict.failure) : "unknown"},
                              {"segment", verdict.failed_segment}}
                             .dump()
                      << '\n';
        }
    }
    std::cerr << "checked " << checked << " answers, " << violations << " violations\n";
    return violations == 0 ? 0 : 1;
}

// --- eval -------------------------------------------------------------------

std::vector<double> values_of(const std::vector<std::pair<std::string, double>>& v)
{
    std::vector<double> out;
    for (const auto& [id, x] : v)
        out.push_back(x);
    return out;
}

std::vector<double> values_of(const std::vector<metrics::FlowEntry>& v)
{
    std::vector<double> out;
    for (const auto& e : v)
        out.push_back(e.tau);
    return out;
}

void print_welch(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() < 2 || b.size() < 2) {
        std::cout << "welch: not enough samples\n";
        return;
    }
    const auto w = metrics::welch_t_test(a, b);
    std::cout << "welch t " << fixed(w.t) << " df " << fixed(w.df, 2) << " p " << std::setprecision(6) << w.p_two_tailed
              << '\n';
}

int run_eval(const std::string& metric, const std::string& path, const std::string& compare, const std::string& unit,
             const std::string& histogram_csv, std::size_t bins, bool per_conversation)
{
    const auto ds = load(path, unit);
    std::optional<Dataset> other;
    if (!compare.empty())
        other = load(compare, unit);

    if (metric == "coverage") {
        const auto r = metrics::coverage(ds);
        if (per_conversation)
            for (const auto& [id, v] : r.per_conversation)
                std::cout << id << ' ' << fixed(v) << '\n';
        std::cout << ds.name << " coverage mean " << fixed(r.mean) << " std " << fixed(r.std) << " n "
                  << r.per_conversation.size() << '\n';
        const auto mine = values_of(r.per_conversation);
        if (!histogram_csv.empty())
            write_file_atomic(histogram_csv, metrics::histogram(mine, 0.0, 1.0, bins).csv());
        if (other) {
            const auto ro = metrics::coverage(*other);
            std::cout << other->name << " coverage mean " << fixed(ro.mean) << " std " << fixed(ro.std) << " n "
                      << ro.per_conversation.size() << '\n';
            print_welch(mine, values_of(ro.per_conversation));
        }
    } else if (metric == "flow") {
        const auto r = metrics::conversation_flow(ds);
        if (per_conversation)
            for (const auto& e : r.per_conversation)
                std::cout << e.conversation_id << ' ' << fixed(e.tau) << '\n';
        std::cout << ds.name << " krcc mean " << fixed(r.mean) << " n " << r.per_conversation.size() << " excluded "
                  << r.excluded << '\n';
        const auto mine = values_of(r.per_conversation);
        if (!histogram_csv.empty())
            write_file_atomic(histogram_csv, metrics::histogram(mine, -1.0, 1.0, bins).csv());
        if (other) {
            const auto ro = metrics::conversation_flow(*other);
            std::cout << other->name << " krcc mean " << fixed(ro.mean) << " n " << ro.per_conversation.size()
                      << " excluded " << ro.excluded << '\n';
            print_welch(mine, values_of(ro.per_conversation));
        }
    } else {
        auto print = [](const Dataset& d) {
            const auto s = metrics::dataset_stats(d);
            std::cout << d.name << "\n  conversations " << s.n_conversations << "\n  questions " << s.n_questions
                      << "\n  answered " << s.n_answered << "\n  avg_answer_length " << fixed(s.avg_answer_length, 2)
                      << "\n  avg_spans_per_question " << fixed(s.avg_answers_per_question, 2) << '\n';
        };
        print(ds);
        if (other)
            print(*other);
    }
    return 0;
}

// --- score / pair-stats / filter --------------------------------------------

int run_score(const std::string& path, const std::string& predictions, const std::string& unit,
              std::optional<std::size_t> max_unanswered)
{
    auto ds = load(path, unit);
    if (max_unanswered)
        ds = filter_max_unanswered(ds, *max_unanswered);
    const auto preds = metrics::load_predictions(predictions);
    const auto t = metrics::score_predictions(ds, preds);
    std::cout << "questions " << t.n_questions << "\nprecision " << fixed(100 * t.precision, 2) << "\nrecall "
              << fixed(100 * t.recall, 2) << "\nf1 " << fixed(100 * t.f1, 2) << "\nem " << fixed(100 * t.em, 2)
              << '\n';
    if (!t.missing.empty())
        std::cerr << "warning: " << t.missing.size() << " questions without a prediction scored as zero\n";
    return 0;
}

int run_pair_stats(const std::string& a, const std::string& b, const std::string& unit)
{
    const auto st = metrics::pair_stats(load(a, unit), load(b, unit));
    std::cout << "pairs " << st.total << '\n';
    for (const auto c : {metrics::OverlapClass::Same, metrics::OverlapClass::Overlap, metrics::OverlapClass::Different})
        std::cout << metrics::to_string(c) << ' ' << fixed(st.percent(c), 1) << "%\n";
    for (const auto& [key, n] : st.by_condition)
        std::cout << "  " << metrics::to_string(key.first) << " [" << key.second << "] " << n << '\n';
    std::cout << "b multi-span " << st.b_multi_span << '\n';
    return 0;
}

int run_filter(const std::string& path, const std::string& out, std::size_t limit, const std::string& unit)
{
    const auto ds = filter_max_unanswered(load(path, unit), limit);
    export_dataset(ds, out);
    std::size_t turns = 0;
    for (const auto& c : ds.conversations)
        turns += c.turns.size();
    std::cout << "conversations " << ds.conversations.size() << "\nquestions " << turns << '\n';
    return 0;
}

// --- serve-annotation -------------------------------------------------------

annotation::AnnotationServer* g_server = nullptr;

extern "C" void on_signal(int)
{
    if (g_server)
        g_server->stop();
}

std::string random_token()
{
    std::random_device rd;
    std::ostringstream out;
    for (int i = 0; i < 4; ++i)
        out << std::hex << std::setw(8) << std::setfill('0') << rd();
    return out.str();
}

// Report column names. Two runs usually share the file name "dataset.json", so
// the parent directory is tried next.
std::pair<std::string, std::string> report_names(const std::filesystem::path& a, const std::filesystem::path& b)
{
    auto usable = [](const std::string& x, const std::string& y) {
        return !x.empty() && x != y && x != "n" && x != "tie" && y != "n" && y != "tie";
    };
    const auto a_stem = a.stem().string(), b_stem = b.stem().string();
    if (usable(a_stem, b_stem) && !b_stem.empty())
        return {a_stem, b_stem};
    const auto a_dir = std::filesystem::absolute(a).parent_path().filename().string();
    const auto b_dir = std::filesystem::absolute(b).parent_path().filename().string();
    if (usable(a_dir, b_dir) && !b_dir.empty())
        return {a_dir, b_dir};
    return {"system1", "system2"};
}

struct ServeArgs {
    std::string a, b, quiz, host = "127.0.0.1", state = "annotation_state", admin_token, unit = "char";
    int port = 8080;
    std::uint64_t seed = 0;
    std::size_t min_annotators = 3;
};

int run_serve(const ServeArgs& s)
{
    const auto tasks_path = std::filesystem::path(s.state) / "tasks.json";
    std::vector<annotation::ComparisonTask> tasks;
    if (std::filesystem::exists(tasks_path)) {
        for (const auto& t : json::parse(read_file(tasks_path)))
            tasks.push_back(annotation::task_from_json(t));
    } else {
        std::mt19937_64 rng(s.seed);
        tasks = annotation::build_tasks(load(s.a, s.unit), load(s.b, s.unit), rng);
        json out = json::array();
        for (const auto& t : tasks)
            out.push_back(annotation::task_to_json(t));
        write_file_atomic(tasks_path, out.dump(1) + "\n");
    }
    annotation::AnnotationStore store(std::move(tasks), annotation::Quiz::from_file(s.quiz),
                                      std::filesystem::path(s.state) / "judgments.jsonl");

    annotation::ServerConfig cfg;
    cfg.admin_token = s.admin_token;
    if (cfg.admin_token.empty())
        if (const char* env = std::getenv("CQASIM_ADMIN_TOKEN"))
            cfg.admin_token = env;
    if (cfg.admin_token.empty()) {
        cfg.admin_token = random_token();
        std::cerr << "admin token: " << cfg.admin_token << '\n';
    }
    std::tie(cfg.system1_name, cfg.system2_name) = report_names(s.a, s.b);
    cfg.min_annotators = s.min_annotators;

    annotation::AnnotationServer server(store, cfg);
    const int port = server.bind(s.host, s.port);
    if (port < 0)
        throw DataError("cannot bind " + s.host + ":" + std::to_string(s.port));
    std::cerr << "serving " << store.tasks().size() << " tasks on http://" << s.host << ':' << port << '\n';
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen_after_bind();
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulated conversational QA: generation, evaluation and pairwise annotation"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string unit = "char";
    app.add_option("--offset-unit", unit, "Offset unit of answer_start in input files")
        ->check(CLI::IsMember({"char", "token"}));

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run student/teacher simulations over a context file");
    simulate->add_option("--contexts", sa.contexts, "Contexts or dataset file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sa.out, "Output directory")->required();
    simulate->add_option("--seed", sa.seed, "Random seed")->required();
    simulate->add_option("--backend", sa.backend, "remote or scripted:<file>");
    simulate->add_option("--max-turns", sa.max_turns, "Questions per conversation")->check(CLI::PositiveNumber);
    simulate->add_option("--patience", sa.patience, "Teacher reprompts before giving up")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--parallel", sa.parallel, "Conversations simulated concurrently")->check(CLI::PositiveNumber);
    simulate->add_flag("--force", sa.force, "Re-run conversations already present in --out");
    simulate->add_option("--record", sa.record, "Write a replayable transcript of backend replies");
    simulate->add_option("--endpoint", sa.endpoint, "Chat-completions URL for the remote backend");
    simulate->add_option("--model", sa.model, "Model name for the remote backend");
    simulate->add_option("--api-key-env", sa.api_key_env, "Environment variable holding the API key");
    simulate->add_option("--temperature", sa.temperature, "Sampling temperature")->check(CLI::NonNegativeNumber);
    simulate->add_option("--name", sa.name, "Dataset name written to dataset.json");

    std::string v_dataset;
    int v_max_tokens = 40;
    auto* validate = app.add_subcommand("validate", "Re-check every stored answer span");
    validate->add_option("--dataset", v_dataset)->required()->check(CLI::ExistingFile);
    validate->add_option("--max-answer-tokens", v_max_tokens)->check(CLI::PositiveNumber);

    std::string e_metric, e_dataset, e_compare, e_hist;
    std::size_t e_bins = 10;
    bool e_per = false;
    auto* eval = app.add_subcommand("eval", "Topic coverage, conversation flow or dataset statistics");
    eval->add_option("metric", e_metric)->required()->check(CLI::IsMember({"coverage", "flow", "stats"}));
    eval->add_option("--dataset", e_dataset)->required()->check(CLI::ExistingFile);
    eval->add_option("--compare", e_compare, "Second dataset; adds a Welch t-test")->check(CLI::ExistingFile);
    eval->add_option("--histogram", e_hist, "Write a histogram CSV of per-conversation values");
    eval->add_option("--bins", e_bins)->check(CLI::PositiveNumber);
    eval->add_flag("--per-conversation", e_per, "Print one line per conversation");

    std::string s_dataset, s_predictions;
    std::optional<std::size_t> s_max_unanswered;
    auto* score = app.add_subcommand("score", "Token-level precision/recall/F1/EM of predictions");
    score->add_option("--dataset", s_dataset)->required()->check(CLI::ExistingFile);
    score->add_option("--predictions", s_predictions)->required()->check(CLI::ExistingFile);
    score->add_option("--max-unanswered", s_max_unanswered, "Keep at most N unanswerable questions per conversation");

    std::string p_a, p_b;
    auto* pairs = app.add_subcommand("pair-stats", "Same/Overlap/Different breakdown of two answer sets");
    pairs->add_option("--a", p_a)->required()->check(CLI::ExistingFile);
    pairs->add_option("--b", p_b)->required()->check(CLI::ExistingFile);

    std::string f_dataset, f_out;
    std::size_t f_limit = 3;
    auto* filter = app.add_subcommand("filter", "Drop unanswerable questions beyond a per-conversation limit");
    filter->add_option("--dataset", f_dataset)->required()->check(CLI::ExistingFile);
    filter->add_option("--out", f_out)->required();
    filter->add_option("--limit", f_limit);

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve-annotation", "Serve the pairwise annotation API");
    serve->add_option("--a", sv.a)->required()->check(CLI::ExistingFile);
    serve->add_option("--b", sv.b)->required()->check(CLI::ExistingFile);
    serve->add_option("--quiz", sv.quiz)->required()->check(CLI::ExistingFile);
    serve->add_option("--port", sv.port)->check(CLI::Range(0, 65535));
    serve->add_option("--host", sv.host);
    serve->add_option("--state", sv.state, "Directory for tasks and the judgment log");
    serve->add_option("--seed", sv.seed, "Seed for the A/B assignment");
    serve->add_option("--admin-token", sv.admin_token, "Token for privileged endpoints (or CQASIM_ADMIN_TOKEN)");
    serve->add_option("--min-annotators", sv.min_annotators)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate)
            return run_simulate(sa);
        if (*validate)
            return run_validate(v_dataset, unit, v_max_tokens);
        if (*eval)
            return run_eval(e_metric, e_dataset, e_compare, unit, e_hist, e_bins, e_per);
        if (*score)
            return run_score(s_dataset, s_predictions, unit, s_max_unanswered);
        if (*pairs)
            return run_pair_stats(p_a, p_b, unit);
        if (*filter)
            return run_filter(f_dataset, f_out, f_limit, unit);
        if (*serve) {
            sv.unit = unit;
            return run_serve(sv);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
