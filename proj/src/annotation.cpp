#include "cqasim/annotation.hpp"
#include "cqasim/metrics.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cqasim::annotation {

using nlohmann::json;

namespace {

constexpr std::array<Aspect, 3> kItemAspects{Aspect::Correctness, Aspect::Naturalness, Aspect::Completeness};

json answer_json(const Answer& a)
{
    json spans = json::array();
    for (const auto& s : a.spans)
        spans.push_back({{"text", s.text}, {"start", s.start}, {"end", s.end}});
    return {{"cannot_find", !a.is_found()}, {"spans", spans}, {"raw_text", a.raw_text}, {"attempts", a.attempts}};
}

Answer answer_from(const json& j)
{
    Answer a;
    a.kind = j.at("cannot_find").get<bool>() ? AnswerKind::CannotFind : AnswerKind::Found;
    for (const auto& s : j.at("spans"))
        a.spans.push_back({s.at("text").get<std::string>(), s.at("start").get<std::size_t>(),
                           s.at("end").get<std::size_t>()});
    a.raw_text = j.value("raw_text", std::string{});
    a.attempts = j.value("attempts", 1);
    return a;
}

json intervals_json(const std::vector<text::CharInterval>& v)
{
    json out = json::array();
    for (const auto& iv : v)
        out.push_back({iv.start, iv.end});
    return out;
}

std::vector<text::CharInterval> intervals_from(const json& j)
{
    std::vector<text::CharInterval> out;
    for (const auto& p : j)
        out.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    return out;
}

json aspects_json(const std::vector<Aspect>& v)
{
    json out = json::array();
    for (const auto a : v)
        out.push_back(to_string(a));
    return out;
}

std::string displayed(const Answer& a)
{
    return a.is_found() ? a.serialized() : std::string(kCannotFindPhrase);
}

std::string unit_key(const Judgment& j)
{
    return j.annotator + '\x1f' + j.task_id + '\x1f' + (j.item ? std::to_string(*j.item) : "conversation") + '\x1f' +
           to_string(j.aspect);
}

std::string lower_trimmed(std::string_view s)
{
    return text::to_lower_ascii(text::trim(s));
}

} // namespace

const char* to_string(Aspect a)
{
    switch (a) {
    case Aspect::Correctness:
        return "correctness";
    case Aspect::Naturalness:
        return "naturalness";
    case Aspect::Completeness:
        return "completeness";
    case Aspect::Preference:
        return "preference";
    }
    return "unknown";
}

const char* to_string(Choice c)
{
    switch (c) {
    case Choice::A:
        return "A";
    case Choice::B:
        return "B";
    case Choice::Neither:
        return "Neither";
    case Choice::Both:
        return "Both";
    }
    return "unknown";
}

std::optional<Aspect> aspect_from_string(std::string_view s)
{
    for (auto a : {Aspect::Correctness, Aspect::Naturalness, Aspect::Completeness, Aspect::Preference})
        if (s == to_string(a))
            return a;
    return std::nullopt;
}

std::optional<Choice> choice_from_string(std::string_view s)
{
    for (auto c : {Choice::A, Choice::B, Choice::Neither, Choice::Both})
        if (s == to_string(c))
            return c;
    return std::nullopt;
}

const std::array<Aspect, 3>& item_aspects() { return kItemAspects; }

bool TaskItem::judgeable_on(Aspect a) const
{
    return std::find(judgeable.begin(), judgeable.end(), a) != judgeable.end();
}

std::optional<System> ComparisonTask::system_for(Choice c) const
{
    if (c == Choice::A)
        return a_is_system1 ? System::System1 : System::System2;
    if (c == Choice::B)
        return a_is_system1 ? System::System2 : System::System1;
    return std::nullopt;
}

std::vector<Aspect> judgeable_aspects(const Answer& a, const Answer& b)
{
    if (displayed(a) == displayed(b))
        return {};
    if (a.is_found() != b.is_found())
        return {Aspect::Correctness};
    return {kItemAspects.begin(), kItemAspects.end()};
}

std::vector<ComparisonTask> build_tasks(const Dataset& ds1, const Dataset& ds2, std::mt19937_64& rng)
{
    std::vector<ComparisonTask> out;
    for (const auto& c1 : ds1.conversations) {
        const auto* c2 = ds2.find(c1.id());
        if (!c2)
            continue;
        if (c1.turns.size() != c2->turns.size())
            throw metrics::PairMismatch("conversation '" + c1.id() + "': question lists differ in length");
        ComparisonTask task;
        task.id = c1.id();
        task.context = c1.context;
        task.a_is_system1 = (rng() & 1U) == 0;
        for (std::size_t i = 0; i < c1.turns.size(); ++i) {
            const auto& t1 = c1.turns[i];
            const auto& t2 = c2->turns[i];
            if (text::trim(t1.question) != text::trim(t2.question))
                throw metrics::PairMismatch("conversation '" + c1.id() + "' turn " + std::to_string(i) +
                                            ": questions differ");
            TaskItem item;
            item.question = t1.question;
            item.answer_a = task.a_is_system1 ? t1.answer : t2.answer;
            item.answer_b = task.a_is_system1 ? t2.answer : t1.answer;
            item.judgeable = judgeable_aspects(item.answer_a, item.answer_b);
            item.highlights_a = metrics::locate_spans(item.answer_a, c1.context);
            item.highlights_b = metrics::locate_spans(item.answer_b, c1.context);
            task.items.push_back(std::move(item));
        }
        out.push_back(std::move(task));
    }
    return out;
}

json blinded_json(const ComparisonTask& task)
{
    json items = json::array();
    for (std::size_t i = 0; i < task.items.size(); ++i) {
        const auto& it = task.items[i];
        items.push_back({{"index", i},
                         {"question", it.question},
                         {"answer_a", displayed(it.answer_a)},
                         {"answer_b", displayed(it.answer_b)},
                         {"judgeable_aspects", aspects_json(it.judgeable)},
                         {"highlights_a", intervals_json(it.highlights_a)},
                         {"highlights_b", intervals_json(it.highlights_b)}});
    }
    return {{"id", task.id},
            {"context",
             {{"title", task.context.title},
              {"background", task.context.background},
              {"section_header", task.context.section_header},
              {"section_text", task.context.section_text}}},
            {"items", items}};
}

json task_to_json(const ComparisonTask& task)
{
    json items = json::array();
    for (const auto& it : task.items)
        items.push_back({{"question", it.question},
                         {"answer_a", answer_json(it.answer_a)},
                         {"answer_b", answer_json(it.answer_b)},
                         {"judgeable_aspects", aspects_json(it.judgeable)},
                         {"highlights_a", intervals_json(it.highlights_a)},
                         {"highlights_b", intervals_json(it.highlights_b)}});
    return {{"id", task.id},
            {"context",
             {{"id", task.context.id},
              {"title", task.context.title},
              {"background", task.context.background},
              {"section_header", task.context.section_header},
              {"section_text", task.context.section_text}}},
            {"a_is_system1", task.a_is_system1},
            {"items", items}};
}

ComparisonTask task_from_json(const json& j)
{
    ComparisonTask t;
    t.id = j.at("id").get<std::string>();
    const auto& c = j.at("context");
    t.context.id = c.at("id").get<std::string>();
    t.context.title = c.at("title").get<std::string>();
    t.context.background = c.value("background", std::string{});
    t.context.section_header = c.at("section_header").get<std::string>();
    t.context.section_text = c.at("section_text").get<std::string>();
    t.a_is_system1 = j.at("a_is_system1").get<bool>();
    for (const auto& ij : j.at("items")) {
        TaskItem it;
        it.question = ij.at("question").get<std::string>();
        it.answer_a = answer_from(ij.at("answer_a"));
        it.answer_b = answer_from(ij.at("answer_b"));
        for (const auto& a : ij.at("judgeable_aspects")) {
            const auto asp = aspect_from_string(a.get<std::string>());
            if (!asp)
                throw std::invalid_argument("unknown aspect in task '" + t.id + "'");
            it.judgeable.push_back(*asp);
        }
        it.highlights_a = intervals_from(ij.value("highlights_a", json::array()));
        it.highlights_b = intervals_from(ij.value("highlights_b", json::array()));
        t.items.push_back(std::move(it));
    }
    return t;
}

// --- onboarding -------------------------------------------------------------

std::vector<std::string> Quiz::key() const
{
    std::vector<std::string> out;
    for (const auto& q : questions)
        out.push_back(q.answer);
    return out;
}

json Quiz::public_json() const
{
    json qs = json::array();
    for (const auto& q : questions)
        qs.push_back({{"id", q.id}, {"prompt", q.prompt}, {"options", q.options}});
    return {{"questions", qs}, {"max_attempts", max_attempts}, {"pass_fraction", 0.75}};
}

Quiz Quiz::from_json(const json& j)
{
    Quiz quiz;
    quiz.max_attempts = j.value("max_attempts", 1);
    if (quiz.max_attempts < 1)
        throw std::invalid_argument("quiz max_attempts must be >= 1");
    for (const auto& q : j.at("questions")) {
        QuizQuestion qq;
        qq.id = q.at("id").get<std::string>();
        qq.prompt = q.value("prompt", std::string{});
        qq.options = q.value("options", std::vector<std::string>{});
        qq.answer = q.at("answer").get<std::string>();
        quiz.questions.push_back(std::move(qq));
    }
    if (quiz.questions.empty())
        throw std::invalid_argument("quiz has no questions");
    return quiz;
}

Quiz Quiz::from_file(const std::filesystem::path& path)
{
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
}

bool gate_onboarding(const std::vector<std::string>& responses, const std::vector<std::string>& key)
{
    if (key.empty())
        throw std::invalid_argument("onboarding key is empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < std::min(responses.size(), key.size()); ++i)
        if (lower_trimmed(responses[i]) == lower_trimmed(key[i]))
            ++correct;
    return 4 * correct >= 3 * key.size();
}

// --- judgments --------------------------------------------------------------

json judgment_to_json(const Judgment& j)
{
    json out{{"sequence", j.sequence},
             {"annotator", j.annotator},
             {"task_id", j.task_id},
             {"item", nullptr},
             {"aspect", to_string(j.aspect)},
             {"choice", to_string(j.choice)},
             {"justification", j.justification}};
    if (j.item)
        out["item"] = *j.item;
    return out;
}

Judgment judgment_from_json(const json& j)
{
    auto bad = [](const std::string& m) { return ServiceError(400, "bad_request", m); };
    if (!j.is_object())
        throw bad("judgment must be an object");
    Judgment out;
    try {
        out.annotator = j.at("annotator").get<std::string>();
        out.task_id = j.at("task_id").get<std::string>();
        if (j.contains("item") && !j["item"].is_null()) {
            const auto& v = j["item"];
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw bad("item must be a non-negative integer or null");
            out.item = v.get<std::size_t>();
        }
        const auto aspect = aspect_from_string(j.at("aspect").get<std::string>());
        if (!aspect)
            throw bad("unknown aspect");
        out.aspect = *aspect;
        const auto choice = choice_from_string(j.at("choice").get<std::string>());
        if (!choice)
            throw bad("choice must be one of A, B, Neither, Both");
        out.choice = *choice;
        out.justification = j.value("justification", std::string{});
        out.sequence = j.value("sequence", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw bad(std::string("malformed judgment: ") + e.what());
    }
    if (out.annotator.empty())
        throw bad("annotator is empty");
    return out;
}

// --- aggregation ------------------------------------------------------------

double fleiss_kappa(const std::vector<std::array<std::size_t, 4>>& counts)
{
    double p_bar = 0.0;
    std::size_t items = 0;
    std::array<double, 4> totals{};
    double all = 0.0;
    for (const auto& row : counts) {
        std::size_t n = 0;
        double sq = 0.0;
        for (const auto c : row) {
            n += c;
            sq += static_cast<double>(c) * static_cast<double>(c);
        }
        if (n < 2)
            continue;
        const auto nd = static_cast<double>(n);
        p_bar += (sq - nd) / (nd * (nd - 1.0));
        for (std::size_t k = 0; k < 4; ++k)
            totals[k] += static_cast<double>(row[k]);
        all += nd;
        ++items;
    }
    if (items == 0)
        throw std::invalid_argument("fleiss_kappa: no item has two ratings");
    p_bar /= static_cast<double>(items);
    double p_e = 0.0;
    for (const auto t : totals)
        p_e += (t / all) * (t / all);
    if (p_e >= 1.0)
        return 1.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

std::optional<System> majority(const std::vector<std::optional<System>>& votes)
{
    std::size_t s1 = 0, s2 = 0;
    for (const auto& v : votes) {
        if (v == System::System1)
            ++s1;
        else if (v == System::System2)
            ++s2;
    }
    if (2 * s1 > votes.size())
        return System::System1;
    if (2 * s2 > votes.size())
        return System::System2;
    return std::nullopt;
}

namespace {

double pct(std::size_t part, std::size_t n)
{
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(n);
}

void tally(AspectRow& row, std::optional<System> s)
{
    ++row.n;
    if (s == System::System1)
        ++row.system1;
    else if (s == System::System2)
        ++row.system2;
    else
        ++row.tie;
}

struct Accumulator {
    AggregateResult result;
    std::vector<std::array<std::size_t, 4>> kappa_rows;
    std::optional<std::size_t> min_annotators_seen;
};

// Returns false when some unit had too few annotators.
bool accumulate(Accumulator& acc, const ComparisonTask& task, const std::vector<Judgment>& judgments,
                std::size_t min_annotators)
{
    // unit -> annotator -> choice; first judgment per annotator counts
    std::map<std::pair<std::optional<std::size_t>, Aspect>, std::map<std::string, Choice>> units;
    for (std::size_t i = 0; i < task.items.size(); ++i)
        for (const auto a : task.items[i].judgeable)
            units[{i, a}];
    units[{std::nullopt, Aspect::Preference}];
    for (const auto& j : judgments)
        if (j.task_id == task.id) {
            auto it = units.find({j.item, j.aspect});
            if (it != units.end())
                it->second.emplace(j.annotator, j.choice);
        }

    bool complete = true;
    bool any = false;
    std::set<std::string> annotators;
    for (const auto& [unit, votes] : units) {
        if (votes.size() < min_annotators || votes.empty()) {
            complete = false;
            ++acc.result.pending_units;
            continue;
        }
        any = true;
        const auto aspect = unit.second;
        std::vector<std::optional<System>> systems;
        std::array<std::size_t, 4> row{};
        for (const auto& [who, choice] : votes) {
            annotators.insert(who);
            const auto s = task.system_for(choice);
            systems.push_back(s);
            tally(acc.result.per_annotator[aspect], s);
            if (s == System::System1)
                ++row[0];
            else if (s == System::System2)
                ++row[1];
            else
                ++row[choice == Choice::Neither ? 2 : 3];
        }
        tally(acc.result.majority[aspect], majority(systems));
        if (aspect != Aspect::Preference && votes.size() >= 2)
            acc.kappa_rows.push_back(row);
    }
    if (any) {
        ++acc.result.tasks;
        acc.min_annotators_seen = std::min(acc.min_annotators_seen.value_or(annotators.size()), annotators.size());
    }
    return complete;
}

AggregateResult finish(Accumulator& acc)
{
    if (!acc.kappa_rows.empty())
        acc.result.kappa = fleiss_kappa(acc.kappa_rows);
    acc.result.n_annotators_per_task = acc.min_annotators_seen.value_or(0);
    return std::move(acc.result);
}

json row_json(const AspectRow& r, const std::string& s1, const std::string& s2)
{
    return {{"n", r.n}, {s1, r.system1_pct()}, {s2, r.system2_pct()}, {"tie", r.tie_pct()}};
}

} // namespace

double AspectRow::system1_pct() const { return pct(system1, n); }
double AspectRow::system2_pct() const { return pct(system2, n); }
double AspectRow::tie_pct() const { return pct(tie, n); }

AggregateResult aggregate(const ComparisonTask& task, const std::vector<Judgment>& judgments,
                          std::size_t min_annotators)
{
    Accumulator acc;
    if (!accumulate(acc, task, judgments, min_annotators))
        throw InsufficientAnnotators("task '" + task.id + "' has units with fewer than " +
                                     std::to_string(min_annotators) + " annotators");
    return finish(acc);
}

AggregateResult aggregate_all(const std::vector<ComparisonTask>& tasks, const std::vector<Judgment>& judgments,
                              std::size_t min_annotators)
{
    Accumulator acc;
    for (const auto& t : tasks)
        accumulate(acc, t, judgments, min_annotators);
    return finish(acc);
}

json aggregate_to_json(const AggregateResult& r, const std::string& system1_name, const std::string& system2_name)
{
    json maj = json::object(), per = json::object();
    for (const auto a : {Aspect::Correctness, Aspect::Naturalness, Aspect::Completeness, Aspect::Preference}) {
        const auto m = r.majority.find(a);
        maj[to_string(a)] = row_json(m == r.majority.end() ? AspectRow{} : m->second, system1_name, system2_name);
        const auto p = r.per_annotator.find(a);
        per[to_string(a)] =
            row_json(p == r.per_annotator.end() ? AspectRow{} : p->second, system1_name, system2_name);
    }
    return {{"majority", maj},
            {"per_annotator", per},
            {"kappa", r.kappa ? json(*r.kappa) : json(nullptr)},
            {"n_annotators_per_task", r.n_annotators_per_task},
            {"tasks", r.tasks},
            {"pending_units", r.pending_units}};
}

// --- store ------------------------------------------------------------------

AnnotationStore::AnnotationStore(std::vector<ComparisonTask> tasks, Quiz quiz,
                                 std::optional<std::filesystem::path> log_path)
    : tasks_(std::move(tasks))
    , quiz_(std::move(quiz))
    , log_path_(std::move(log_path))
{
    if (!log_path_)
        return;
    std::error_code ec;
    if (std::filesystem::exists(*log_path_, ec)) {
        std::istringstream in(read_file(*log_path_));
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty())
                continue;
            json ev;
            try {
                ev = json::parse(line);
            } catch (const json::parse_error&) {
                continue; // torn final write
            }
            apply(ev);
        }
    } else if (log_path_->has_parent_path()) {
        std::filesystem::create_directories(log_path_->parent_path());
    }
    log_.open(*log_path_, std::ios::app | std::ios::binary);
    if (!log_)
        throw IoFailure("cannot open judgment log " + log_path_->string());
}

const ComparisonTask* AnnotationStore::task(std::string_view id) const
{
    for (const auto& t : tasks_)
        if (t.id == id)
            return &t;
    return nullptr;
}

void AnnotationStore::append_log(const json& event)
{
    if (!log_.is_open())
        return;
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_)
        throw ServiceError(500, "io_failure", "cannot append to judgment log");
}

void AnnotationStore::apply(const json& ev)
{
    const auto type = ev.value("event", std::string{});
    if (type == "onboarding") {
        OnboardingOutcome o;
        o.passed = ev.at("passed").get<bool>();
        o.correct = ev.at("correct").get<std::size_t>();
        o.total = ev.at("total").get<std::size_t>();
        o.attempts = ev.at("attempts").get<int>();
        onboarding_[ev.at("annotator").get<std::string>()] = o;
    } else if (type == "judgment") {
        auto j = judgment_from_json(ev.at("judgment"));
        keys_.insert(unit_key(j));
        next_sequence_ = std::max(next_sequence_, j.sequence + 1);
        judgments_.push_back(std::move(j));
    } else if (type == "flag") {
        flagged_[ev.at("sequence").get<std::uint64_t>()] = ev.value("reason", std::string{});
    }
}

OnboardingOutcome AnnotationStore::submit_onboarding(const std::string& annotator,
                                                     const std::vector<std::string>& responses)
{
    if (annotator.empty())
        throw ServiceError(400, "bad_request", "annotator is empty");
    std::lock_guard lock(mu_);
    auto prev = onboarding_.find(annotator);
    if (prev != onboarding_.end()) {
        if (prev->second.passed)
            return prev->second;
        if (prev->second.attempts >= quiz_.max_attempts)
            throw ServiceError(403, "locked_out", "onboarding attempts exhausted for '" + annotator + "'");
    }
    const auto key = quiz_.key();
    OnboardingOutcome o;
    o.total = key.size();
    for (std::size_t i = 0; i < std::min(responses.size(), key.size()); ++i)
        if (lower_trimmed(responses[i]) == lower_trimmed(key[i]))
            ++o.correct;
    o.passed = gate_onboarding(responses, key);
    o.attempts = prev == onboarding_.end() ? 1 : prev->second.attempts + 1;
    append_log({{"event", "onboarding"},
                {"annotator", annotator},
                {"passed", o.passed},
                {"correct", o.correct},
                {"total", o.total},
                {"attempts", o.attempts}});
    onboarding_[annotator] = o;
    return o;
}

bool AnnotationStore::is_gated(const std::string& annotator) const
{
    std::lock_guard lock(mu_);
    const auto it = onboarding_.find(annotator);
    return it != onboarding_.end() && it->second.passed;
}

const ComparisonTask* AnnotationStore::next_task(const std::string& annotator) const
{
    std::lock_guard lock(mu_);
    for (const auto& t : tasks_) {
        Judgment probe;
        probe.annotator = annotator;
        probe.task_id = t.id;
        probe.aspect = Aspect::Preference;
        bool done = keys_.count(unit_key(probe)) > 0;
        for (std::size_t i = 0; done && i < t.items.size(); ++i)
            for (const auto a : t.items[i].judgeable) {
                probe.item = i;
                probe.aspect = a;
                if (!keys_.count(unit_key(probe))) {
                    done = false;
                    break;
                }
            }
        if (!done)
            return &t;
    }
    return nullptr;
}

void AnnotationStore::check(const Judgment& j, const std::set<std::string>& pending) const
{
    const auto gate = onboarding_.find(j.annotator);
    if (gate == onboarding_.end() || !gate->second.passed)
        throw ServiceError(403, "not_onboarded", "annotator '" + j.annotator + "' has not passed onboarding");
    const auto* t = task(j.task_id);
    if (!t)
        throw ServiceError(404, "unknown_task", "no task '" + j.task_id + "'");
    if (j.aspect == Aspect::Preference) {
        if (j.item)
            throw ServiceError(400, "bad_request", "preference is conversation-level; item must be null");
        if (text::trim(j.justification).empty())
            throw ServiceError(400, "missing_justification", "preference requires a justification");
    } else {
        if (!j.item)
            throw ServiceError(400, "bad_request", "item index required for " + std::string(to_string(j.aspect)));
        if (*j.item >= t->items.size())
            throw ServiceError(400, "bad_request", "item index out of range");
        if (!t->items[*j.item].judgeable_on(j.aspect))
            throw ServiceError(422, "not_judgeable",
                               "item " + std::to_string(*j.item) + " is not judgeable on " + to_string(j.aspect));
    }
    const auto key = unit_key(j);
    if (keys_.count(key) || pending.count(key))
        throw ServiceError(409, "duplicate", "judgment already recorded for this annotator, item and aspect");
}

Judgment AnnotationStore::submit(Judgment j)
{
    return submit_batch({std::move(j)}).front();
}

std::vector<Judgment> AnnotationStore::submit_batch(std::vector<Judgment> js)
{
    std::lock_guard lock(mu_);
    std::set<std::string> pending;
    for (const auto& j : js) {
        check(j, pending);
        pending.insert(unit_key(j));
    }
    for (auto& j : js) {
        j.sequence = next_sequence_++;
        append_log({{"event", "judgment"}, {"judgment", judgment_to_json(j)}});
        keys_.insert(unit_key(j));
        judgments_.push_back(j);
    }
    return js;
}

void AnnotationStore::flag(std::uint64_t sequence, const std::string& reason)
{
    std::lock_guard lock(mu_);
    const bool known = std::any_of(judgments_.begin(), judgments_.end(),
                                   [&](const Judgment& j) { return j.sequence == sequence; });
    if (!known)
        throw ServiceError(404, "unknown_judgment", "no judgment #" + std::to_string(sequence));
    append_log({{"event", "flag"}, {"sequence", sequence}, {"reason", reason}});
    flagged_[sequence] = reason;
}

std::map<std::uint64_t, std::string> AnnotationStore::flagged() const
{
    std::lock_guard lock(mu_);
    return flagged_;
}

std::vector<Judgment> AnnotationStore::judgments() const
{
    std::lock_guard lock(mu_);
    return judgments_;
}

AggregateResult AnnotationStore::report(std::size_t min_annotators) const
{
    std::vector<Judgment> kept;
    {
        std::lock_guard lock(mu_);
        for (const auto& j : judgments_)
            if (!flagged_.count(j.sequence))
                kept.push_back(j);
    }
    return aggregate_all(tasks_, kept, min_annotators);
}

std::string AnnotationStore::export_jsonl() const
{
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& j : judgments_) {
        auto rec = judgment_to_json(j);
        const auto* t = task(j.task_id);
        const auto s = t ? t->system_for(j.choice) : std::nullopt;
        rec["system"] = s ? json(s == System::System1 ? "system1" : "system2") : json(nullptr);
        rec["flagged"] = flagged_.count(j.sequence) > 0;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

} // namespace cqasim::annotation
