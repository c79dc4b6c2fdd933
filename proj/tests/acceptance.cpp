// Runs the acceptance checks and prints one PASS/FAIL/SKIP line per check.
#include "annotation_fixture.hpp"
#include "cqasim/annotation_server.hpp"
#include "cqasim/chat.hpp"
#include "cqasim/metrics.hpp"
#include "cqasim/simulator.hpp"
#include "cqasim/teacher.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

using namespace cqasim;
using nlohmann::json;

namespace {

struct Failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Skipped : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what)
{
    if (!ok)
        throw Failed(what);
}

bool near(double a, double b, double tol = 1e-9) { return std::fabs(a - b) <= tol; }

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::filesystem::path kData = CQASIM_TEST_DATA;

// ---------------------------------------------------------------------------

std::string patience_loop()
{
    const auto ctx = testing::context("ada",
                                      "Lovelace was born in London. In 1833 she met Charles Babbage.",
                                      "Ada Lovelace was an English mathematician.");
    TeacherConfig cfg;
    expect(cfg.patience == 4, "default patience is 4");
    chat::ScriptedBackend backend({"She met Babbage.", "an English mathematician", "Born in Paris.",
                                   "Ada Lovelace was an English mathematician.", "Something else entirely.",
                                   "Charles Babbage"});
    const auto t0 = std::chrono::steady_clock::now();
    auto session = teacher::open_session(backend, ctx, cfg);
    const auto out = teacher::answer_with_validation(backend, session, "Who did she meet?", ctx, cfg);
    const auto elapsed = std::chrono::steady_clock::now() - t0;

    expect(!out.answer.is_found(), "falls back to CannotFind");
    expect(out.answer.raw_text == kCannotFindPhrase, "canonical fallback text");
    expect(out.reprompts.size() == 4, "exactly 4 reprompts");
    expect(out.answer.attempts == 5, "5 attempts recorded");
    expect(out.backend_calls == 5, "sixth scripted reply never requested");
    const std::vector<std::string> ids{"copy_exactly", "not_from_background", "copy_exactly", "not_from_background"};
    expect(out.reprompts == ids, "reprompt ids recorded in order");
    expect(elapsed < std::chrono::seconds(1), "runtime under 1 s");
    return "4 reprompts, 5 attempts";
}

// ---------------------------------------------------------------------------

enum class Verdict { Span, CannotFind, NotASpan, Background, TooLong };

struct OracleCase {
    std::string raw;
    Verdict verdict;
    std::vector<std::string> spans; // expected document substrings
};

std::string validation_oracle()
{
    std::string long_sentence = "The engine";
    for (int i = 0; i < 42; ++i)
        long_sentence += " part" + std::to_string(i);
    long_sentence += ".";
    const auto ctx = testing::context(
        "ada",
        "Lovelace was born (10 December 1815) in London.  Her mother   promoted her interest in mathematics. "
        "In 1833 she met Charles Babbage. Babbage designed the Analytical Engine. " +
            long_sentence,
        "Ada Lovelace was an English mathematician and writer.");
    const TeacherConfig cfg;

    const std::vector<OracleCase> table{
        {"In 1833 she met Charles Babbage.", Verdict::Span, {"In 1833 she met Charles Babbage."}},
        {"Charles Babbage", Verdict::Span, {"Charles Babbage"}},
        {"Her mother promoted her interest in mathematics.", Verdict::Span,
         {"Her mother   promoted her interest in mathematics."}},
        {"Her  mother promoted", Verdict::Span, {"Her mother   promoted"}},
        {"London. Her mother promoted", Verdict::Span, {"London.  Her mother   promoted"}},
        {"Lovelace was born in London.", Verdict::Span, {"Lovelace was born (10 December 1815) in London."}},
        {"born in London", Verdict::Span, {"born (10 December 1815) in London"}},
        {"London; Charles Babbage", Verdict::Span, {"London", "Charles Babbage"}},
        {"10 December 1815; Analytical Engine; In 1833", Verdict::Span,
         {"10 December 1815", "Analytical Engine", "In 1833"}},
        {"In 1833 she met Charles Babbage. Babbage designed the Analytical Engine.", Verdict::Span,
         {"In 1833 she met Charles Babbage. Babbage designed the Analytical Engine."}},
        {"Lovelace was born (10 December 1815) in London. In 1833 she met Charles Babbage.", Verdict::Span,
         {"Lovelace was born (10 December 1815) in London.", "In 1833 she met Charles Babbage."}},
        {"charles babbage", Verdict::Span, {"Charles Babbage"}},
        {"Charles Babbage!", Verdict::Span, {"Charles Babbage"}},
        {"an English mathematician and writer", Verdict::Background, {}},
        {"Ada Lovelace was an English mathematician and writer.", Verdict::Background, {}},
        {"London; an English mathematician", Verdict::Background, {}},
        {"She met Babbage in 1833.", Verdict::NotASpan, {}},
        {"London; Paris", Verdict::NotASpan, {}},
        {"", Verdict::NotASpan, {}},
        {long_sentence, Verdict::TooLong, {}},
        {"I cannot find the answer.", Verdict::CannotFind, {}},
        {"I cannot find the answer", Verdict::CannotFind, {}},
        {"  i CANNOT find the answer!  ", Verdict::CannotFind, {}},
        {"‘I cannot find the answer’", Verdict::CannotFind, {}},
        {"I cannot find the answer in the text.", Verdict::NotASpan, {}},
    };

    std::size_t agreed = 0;
    std::string first_miss;
    for (const auto& row : table) {
        const auto v = teacher::validate_answer(row.raw, ctx, cfg);
        Verdict got = Verdict::Span;
        if (v.cannot_find)
            got = Verdict::CannotFind;
        else if (!v.valid)
            got = *v.failure == teacher::Failure::TooLong            ? Verdict::TooLong
                  : *v.failure == teacher::Failure::CopiedFromBackground ? Verdict::Background
                                                                          : Verdict::NotASpan;
        bool ok = got == row.verdict;
        if (ok && got == Verdict::Span) {
            ok = v.matched_spans.size() == row.spans.size();
            for (std::size_t i = 0; ok && i < row.spans.size(); ++i) {
                const auto& s = v.matched_spans[i];
                ok = s.text == row.spans[i] &&
                     text::substr_codepoints(ctx.section_text, s.start, s.end) == row.spans[i];
            }
        }
        if (ok)
            ++agreed;
        else if (first_miss.empty())
            first_miss = row.raw;
    }
    expect(table.size() >= 20, "at least 20 cases");
    expect(agreed == table.size(), "disagreement on '" + first_miss + "'");
    return std::to_string(agreed) + "/" + std::to_string(table.size()) + " cases agree";
}

// ---------------------------------------------------------------------------

Conversation conversation_with(const TopicContext& ctx, const std::vector<std::optional<std::pair<std::size_t, std::size_t>>>& spans)
{
    Conversation c;
    c.context = ctx;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        Turn t;
        t.index = i;
        t.id = ctx.id + "_q#" + std::to_string(i);
        t.question = "Q?";
        if (spans[i]) {
            const auto [s, e] = *spans[i];
            const auto body = text::substr_codepoints(ctx.section_text, s, e);
            t.answer = Answer::found({{body, s, e}}, body);
        }
        c.turns.push_back(t);
    }
    return c;
}

std::string coverage_oracle()
{
    std::mt19937_64 rng(20240601);
    const std::vector<std::string> alphabet{"a", "b", " ", "é", "€", "z", ".", "ß"};
    for (int k = 0; k < 200; ++k) {
        const auto n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
        std::string s;
        for (std::size_t i = 0; i < n; ++i)
            s += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
        const auto ctx = testing::context("r" + std::to_string(k), s);
        const auto turns = std::uniform_int_distribution<int>(0, 12)(rng);
        std::vector<std::optional<std::pair<std::size_t, std::size_t>>> spans;
        std::vector<bool> marked(n, false);
        for (int t = 0; t < turns; ++t) {
            if (std::bernoulli_distribution(0.2)(rng)) {
                spans.push_back(std::nullopt);
                continue;
            }
            auto a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            auto b = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            if (a > b)
                std::swap(a, b);
            spans.emplace_back(std::make_pair(a, b + 1));
            for (auto i = a; i <= b; ++i)
                marked[i] = true;
        }
        const double oracle =
            static_cast<double>(std::count(marked.begin(), marked.end(), true)) / static_cast<double>(n);
        const double got = metrics::topic_coverage(conversation_with(ctx, spans));
        expect(got == oracle, "conversation " + std::to_string(k) + ": " + std::to_string(got) + " vs " +
                                  std::to_string(oracle));
    }
    const auto ctx = testing::context("anchor", "Alpha beta gamma.");
    expect(metrics::topic_coverage(conversation_with(ctx, {std::nullopt, std::nullopt})) == 0.0, "anchor 0.0");
    expect(metrics::topic_coverage(conversation_with(ctx, {})) == 0.0, "empty conversation is 0.0");
    expect(metrics::topic_coverage(conversation_with(ctx, {std::make_pair(0, 17)})) == 1.0, "anchor 1.0");
    expect(metrics::topic_coverage(conversation_with(ctx, {std::make_pair(0, 9), std::make_pair(6, 17)})) == 1.0,
           "overlapping spans cover everything once");
    return "200 random conversations exact, anchors 0.0 and 1.0";
}

// ---------------------------------------------------------------------------

double tau_by_pairs(const std::vector<double>& x, const std::vector<double>& y)
{
    long long concordant = 0, discordant = 0, tx = 0, ty = 0, n0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            ++n0;
            const double dx = x[j] - x[i], dy = y[j] - y[i];
            if (dx == 0)
                ++tx;
            if (dy == 0)
                ++ty;
            if (dx == 0 || dy == 0)
                continue;
            (dx * dy > 0 ? concordant : discordant)++;
        }
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
}

std::string krcc_oracle()
{
    std::size_t checked = 0;
    for (std::size_t n = 2; n <= 6; ++n) {
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 0.0);
        std::iota(y.begin(), y.end(), 0.0);
        do {
            expect(metrics::kendall_tau_b(x, y) == tau_by_pairs(x, y), "permutation mismatch at n=" + std::to_string(n));
            ++checked;
        } while (std::next_permutation(y.begin(), y.end()));
    }
    std::mt19937_64 rng(7);
    for (int k = 0; k < 500; ++k) {
        const auto n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 0.0);
        std::iota(y.begin(), y.end(), 0.0);
        std::shuffle(y.begin(), y.end(), rng);
        expect(metrics::kendall_tau_b(x, y) == tau_by_pairs(x, y), "random permutation mismatch");
        ++checked;
    }
    // Tied document positions (two questions answered by the same span).
    for (int k = 0; k < 200; ++k) {
        const auto n = std::uniform_int_distribution<std::size_t>(3, 10)(rng);
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 0.0);
        for (auto& v : y)
            v = static_cast<double>(std::uniform_int_distribution<int>(0, 3)(rng));
        if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end())
            continue; // constant ranking is undefined
        expect(near(metrics::kendall_tau_b(x, y), tau_by_pairs(x, y), 1e-12), "tied ranking mismatch");
    }

    // Questions about B, then A, then C where the document order is A, B, C.
    const auto ctx = testing::context("abc", "Alpha part. Beta part. Gamma part.");
    const auto conv = conversation_with(ctx, {std::make_pair(12, 22), std::make_pair(0, 11), std::make_pair(23, 34)});
    const double tau = metrics::conversation_flow_krcc(conv);
    expect(tau == 1.0 / 3.0, "{B,A,C} gives 1/3, got " + std::to_string(tau));
    return std::to_string(checked) + " permutations exact, {B,A,C} = 1/3";
}

// ---------------------------------------------------------------------------

std::string token_metrics()
{
    struct Row {
        std::string pred, gold;
        double p, r, f1;
        bool em;
    };
    const std::vector<Row> rows{
        {"the cat sat", "cat sat down", 1.0, 2.0 / 3, 0.8, false},
        {"Charles Babbage", "Charles Babbage.", 1.0, 1.0, 1.0, true},
        {"In London", "London, England", 0.5, 0.5, 0.5, false},
        {"x y z w", "x y", 0.5, 1.0, 2.0 / 3, false},
        {"Paris", "London", 0.0, 0.0, 0.0, false},
        {"New York New York", "New York", 0.5, 1.0, 2.0 / 3, false},
        {"Ada's father, Lord Byron!", "lord byron", 0.5, 1.0, 2.0 / 3, false},
        {"1815", "10 December 1815", 1.0, 1.0 / 3, 0.5, false},
        {"An English mathematician", "English mathematician and writer", 1.0, 0.5, 2.0 / 3, false},
        {"THE ANALYTICAL ENGINE", "the Analytical Engine", 1.0, 1.0, 1.0, true},
    };
    for (const auto& row : rows) {
        const auto s = metrics::score_text(row.pred, row.gold);
        expect(near(s.precision, row.p) && near(s.recall, row.r) && near(s.f1, row.f1) && s.em == row.em,
               "'" + row.pred + "' vs '" + row.gold + "'");
    }
    const auto both = metrics::score_text(std::nullopt, std::nullopt);
    expect(both.precision == 1 && both.recall == 1 && both.f1 == 1 && both.em, "both CannotFind is perfect");
    for (const auto& s : {metrics::score_text(std::nullopt, std::string("London")),
                          metrics::score_text(std::string("London"), std::nullopt)})
        expect(s.precision == 0 && s.recall == 0 && s.f1 == 0 && !s.em, "one-sided CannotFind is zero");

    const auto ctx = testing::context("t", "Alpha beta gamma.");
    const auto found = testing::found(ctx, "beta");
    expect(metrics::token_score(Answer::cannot_find(), Answer::cannot_find()).f1 == 1.0, "answers: both unanswerable");
    expect(metrics::token_score(found, Answer::cannot_find()).f1 == 0.0, "answers: one-sided");
    return "10 pairs within 1e-9, CannotFind rules hold";
}

// ---------------------------------------------------------------------------

std::string fleiss()
{
    using annotation::fleiss_kappa;
    expect(fleiss_kappa({{3, 0, 0, 0}, {0, 3, 0, 0}, {0, 0, 3, 0}, {0, 0, 0, 3}}) == 1.0, "unanimous spread");
    expect(fleiss_kappa({{0, 3, 0, 0}, {0, 3, 0, 0}}) == 1.0, "unanimous single category");
    // P_i = 1, 1/3, 0, 0 -> P̄ = 1/3; p = 6/12, 3/12, 2/12, 1/12 -> P_e = 25/72.
    const double k1 = fleiss_kappa({{3, 0, 0, 0}, {2, 1, 0, 0}, {1, 1, 1, 0}, {0, 1, 1, 1}});
    expect(near(k1, -1.0 / 47.0), "hand matrix one: " + std::to_string(k1));
    // P_i = 1, 1, 1/3, 1/3 -> P̄ = 2/3; p = 5/12, 4/12, 2/12, 1/12 -> P_e = 23/72.
    const double k2 = fleiss_kappa({{3, 0, 0, 0}, {0, 3, 0, 0}, {2, 1, 0, 0}, {0, 0, 2, 1}});
    expect(near(k2, 25.0 / 49.0), "hand matrix two: " + std::to_string(k2));

    std::mt19937_64 rng(99);
    std::vector<std::array<std::size_t, 4>> random(1000, {0, 0, 0, 0});
    for (auto& row : random)
        for (int r = 0; r < 3; ++r)
            ++row[std::uniform_int_distribution<int>(0, 3)(rng)];
    const double kr = fleiss_kappa(random);
    expect(std::fabs(kr) < 0.1, "random kappa " + std::to_string(kr));
    std::ostringstream msg;
    msg << "hand matrices exact, random kappa " << std::setprecision(3) << kr;
    return msg.str();
}

// ---------------------------------------------------------------------------

std::string dataset_anchored()
{
    const char* sim = std::getenv("CQASIM_SIMQUAC");
    const char* sample_quac = std::getenv("CQASIM_QUAC_SAMPLE");
    const char* sample_sim = std::getenv("CQASIM_SIMQUAC_SAMPLE");
    if (!sim)
        throw Skipped("set CQASIM_SIMQUAC (and CQASIM_QUAC_SAMPLE, CQASIM_SIMQUAC_SAMPLE) to the released files");
    const auto ds = load_quac(sim);
    const auto st = metrics::dataset_stats(ds);
    expect(st.n_conversations == 334, "334 conversations, got " + std::to_string(st.n_conversations));
    expect(st.n_questions == 4005, "4005 questions, got " + std::to_string(st.n_questions));
    expect(st.n_answered == 2517, "2517 answered, got " + std::to_string(st.n_answered));
    expect(std::fabs(st.avg_answer_length - 28.23) <= 1.0, "answer length " + std::to_string(st.avg_answer_length));
    expect(std::fabs(st.avg_answers_per_question - 1.32) <= 0.02,
           "spans per question " + std::to_string(st.avg_answers_per_question));
    if (!sample_quac || !sample_sim)
        return "dataset stats match; comparison sample not provided";
    const auto ps = metrics::pair_stats(load_quac(sample_quac), load_quac(sample_sim));
    const std::pair<metrics::OverlapClass, std::size_t> expected[] = {
        {metrics::OverlapClass::Same, 77}, {metrics::OverlapClass::Overlap, 106}, {metrics::OverlapClass::Different, 176}};
    for (const auto& [cls, count] : expected) {
        const auto got = ps.by_class.count(cls) ? ps.by_class.at(cls) : 0;
        expect(got + 1 >= count && got <= count + 1,
               std::string(metrics::to_string(cls)) + " " + std::to_string(got) + " vs " + std::to_string(count));
    }
    return "dataset stats and comparison proportions match";
}

// ---------------------------------------------------------------------------

std::string determinism()
{
    std::vector<TopicContext> contexts;
    for (const auto& c : load_quac(kData / "contexts.json").conversations)
        contexts.push_back(c.context);
    expect(contexts.size() == 5, "5 synthetic contexts");

    testing::TempDir dir;
    SimulationConfig cfg;
    cfg.seed = 2024;
    auto run = [&](const std::string& name, std::size_t k) {
        auto backend = chat::ScriptedBackend::from_file(kData / "script.json");
        sim::BatchOptions opts;
        opts.out_dir = dir / name;
        opts.parallelism = k;
        const auto r = sim::run_batch(contexts, backend, backend, cfg, opts);
        expect(r.errors.empty(), name + " had errors");
        expect(r.dataset.conversations.size() == 5, name + " has 5 conversations");
    };
    run("first", 1);
    run("second", 1);
    run("parallel", 4);
    for (const auto* file : {"dataset.json", "trace.jsonl"}) {
        const auto ref = slurp(dir / "first" / file);
        expect(!ref.empty(), std::string(file) + " written");
        expect(ref == slurp(dir / "second" / file), std::string(file) + " differs between runs");
        expect(ref == slurp(dir / "parallel" / file), std::string(file) + " differs under K=4");
    }
    return "two runs and K=4 byte-identical";
}

// ---------------------------------------------------------------------------

std::string blinding_and_aggregation()
{
    using namespace annotation;
    const auto [a, b] = testing::paired_datasets();
    std::mt19937_64 rng(5);
    AnnotationStore store(build_tasks(a, b, rng), testing::eight_question_quiz());
    const bool a_is_quac = store.tasks()[0].a_is_system1;
    AnnotationServer server(store, ServerConfig{"admin", "quac", "simulated", 3});
    const int port = server.bind("127.0.0.1", 0);
    expect(port > 0, "server bound");
    std::jthread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    struct Stop {
        AnnotationServer& s;
        ~Stop() { s.stop(); }
    } stop{server};

    httplib::Client cli("127.0.0.1", port);
    auto post = [&](const std::string& path, const json& body) {
        auto r = cli.Post(path, body.dump(), "application/json");
        expect(static_cast<bool>(r), "request to " + path);
        return *r;
    };

    const auto task = cli.Get("/api/tasks/conv0");
    expect(task && task->status == 200, "task served");
    for (const auto* leak : {"a_is_system1", "quac", "simulated", "system1"})
        expect(task->body.find(leak) == std::string::npos, std::string("task view leaks ") + leak);

    const json pass{"A", "B", "Both", "Neither", "A", "B", "A", "Neither"};
    const json fail{"A", "B", "Both", "x", "x", "x", "A", "Neither"}; // 5/8 < 75%
    for (const auto* who : {"ann0", "ann1", "ann2"})
        expect(post("/api/onboarding", {{"annotator", who}, {"responses", pass}}).status == 200, "onboarding");
    post("/api/onboarding", {{"annotator", "weak"}, {"responses", fail}});
    const json item3{{"annotator", "weak"}, {"task_id", "conv0"}, {"item", 3}, {"aspect", "correctness"}, {"choice", "A"}};
    expect(post("/api/judgments", item3).status == 403, "below-threshold annotator blocked");

    const char* item3_choice[] = {"A", "A", "B"};
    const char* item2_choice[] = {"A", "B", "Neither"};
    for (int k = 0; k < 3; ++k) {
        const auto who = "ann" + std::to_string(k);
        json identical{{"annotator", who}, {"task_id", "conv0"}, {"item", 0}, {"aspect", "correctness"}, {"choice", "A"}};
        expect(post("/api/judgments", identical).status == 422, "identical-answer item rejected");
        json naturalness{{"annotator", who}, {"task_id", "conv0"}, {"item", 1}, {"aspect", "naturalness"}, {"choice", "A"}};
        expect(post("/api/judgments", naturalness).status == 422, "CannotFind item limited to correctness");

        json judgments = json::array();
        for (const auto* aspect : {"correctness", "naturalness", "completeness"}) {
            judgments.push_back({{"item", 3}, {"aspect", aspect}, {"choice", item3_choice[k]}});
            judgments.push_back({{"item", 2}, {"aspect", aspect}, {"choice", item2_choice[k]}});
        }
        judgments.push_back({{"item", 1}, {"aspect", "correctness"}, {"choice", "Both"}});
        const json submission{{"annotator", who},
                              {"task_id", "conv0"},
                              {"judgments", judgments},
                              {"preference", {{"choice", item3_choice[k]}, {"justification", "reads better"}}}};
        expect(post("/api/submissions", submission).status == 201, "submission accepted");
    }

    expect(cli.Get("/api/report")->status == 403, "report needs the admin token");
    const auto report = cli.Get("/api/report", {{"X-Admin-Token", "admin"}});
    expect(report && report->status == 200, "report served");
    const auto r = json::parse(report->body);
    const std::string winner = a_is_quac ? "quac" : "simulated";
    const std::string loser = a_is_quac ? "simulated" : "quac";
    // Correctness: item 3 {A,A,B} wins; item 2 {A,B,Neither} and item 1 {Both x3} tie.
    const auto& c = r["majority"]["correctness"];
    expect(c["n"] == 3, "three correctness units");
    expect(near(c[winner].get<double>(), 100.0 / 3) && near(c[loser].get<double>(), 0.0) &&
               near(c["tie"].get<double>(), 200.0 / 3),
           "correctness majority/tie split " + c.dump());
    for (const auto* aspect : {"naturalness", "completeness"}) {
        const auto& row = r["majority"][aspect];
        expect(row["n"] == 2 && near(row[winner].get<double>(), 50.0) && near(row["tie"].get<double>(), 50.0),
               std::string(aspect) + " split " + row.dump());
    }
    const auto& pref = r["majority"]["preference"];
    expect(pref["n"] == 1 && near(pref[winner].get<double>(), 100.0), "preference majority");
    expect(r["n_annotators_per_task"] == 3, "three annotators per task");
    return "majority/tie rules, skip rules and onboarding gate hold";
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<std::string()>>> checks{
        {"patience loop", patience_loop},
        {"validation oracle suite", validation_oracle},
        {"coverage vs character marking", coverage_oracle},
        {"KRCC vs pair counting", krcc_oracle},
        {"token metrics", token_metrics},
        {"Fleiss' kappa", fleiss},
        {"dataset-anchored statistics", dataset_anchored},
        {"end-to-end determinism", determinism},
        {"blinding and aggregation", blinding_and_aggregation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto& [name, fn] = checks[i];
        std::string status, detail;
        try {
            detail = fn();
            status = "PASS";
        } catch (const Skipped& e) {
            status = "SKIP";
            detail = e.what();
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = e.what();
            ++failures;
        }
        std::cout << status << ' ' << (i + 1) << ' ' << name << ": " << detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
