#include "cqasim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace cqasim::metrics {

using nlohmann::json;

std::vector<text::CharInterval> locate_spans(const Answer& answer, const TopicContext& ctx)
{
    std::vector<text::CharInterval> out;
    if (!answer.is_found())
        return out;
    const auto doc_len = text::codepoint_count(ctx.section_text);
    std::optional<text::SpanLocator> locator;
    for (const auto& span : answer.spans) {
        if (span.end > span.start && span.end <= doc_len &&
            text::substr_codepoints(ctx.section_text, span.start, span.end) == span.text) {
            out.push_back({span.start, span.end});
            continue;
        }
        if (!locator)
            locator.emplace(ctx.section_text);
        const auto m = locator->find(span.text);
        if (!m)
            throw SpanNotLocatable("span \"" + span.text + "\" not found in section text of '" + ctx.id + "'");
        out.push_back(m->interval);
    }
    return out;
}

double topic_coverage(const Conversation& conv)
{
    const auto doc_len = text::codepoint_count(conv.context.section_text);
    if (doc_len == 0)
        return 0.0;
    std::vector<text::CharInterval> intervals;
    for (const auto& t : conv.turns)
        for (const auto& s : t.answer.spans)
            if (t.answer.is_found() && s.end > s.start)
                intervals.push_back({std::min(s.start, doc_len), std::min(s.end, doc_len)});
    std::sort(intervals.begin(), intervals.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    std::size_t covered = 0;
    std::size_t reach = 0;
    for (const auto& iv : intervals) {
        const auto from = std::max(iv.start, reach);
        if (iv.end > from)
            covered += iv.end - from;
        reach = std::max(reach, iv.end);
    }
    return static_cast<double>(covered) / static_cast<double>(doc_len);
}

double mean(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    const auto m = mean(v);
    double ss = 0.0;
    for (const auto x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double sample_variance(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    const auto m = mean(v);
    double ss = 0.0;
    for (const auto x : v)
        ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

CoverageResult coverage(const Dataset& ds)
{
    CoverageResult r;
    std::vector<double> values;
    for (const auto& c : ds.conversations) {
        const auto f = topic_coverage(c);
        r.per_conversation.emplace_back(c.id(), f);
        values.push_back(f);
    }
    r.mean = mean(values);
    r.std = population_std(values);
    return r;
}

namespace {

using Count = long long;

// Sorts v in place and returns the number of pairs i < j with v[i] > v[j].
Count count_inversions(std::vector<double>& v)
{
    Count swaps = 0;
    std::vector<double> buf(v.size());
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const auto mid = std::min(lo + width, v.size());
            const auto hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[i] <= v[j]) {
                    buf[k++] = v[i++];
                } else {
                    swaps += static_cast<Count>(mid - i);
                    buf[k++] = v[j++];
                }
            }
            while (i < mid)
                buf[k++] = v[i++];
            while (j < hi)
                buf[k++] = v[j++];
        }
        std::swap(v, buf);
    }
    return swaps;
}

template <typename Eq>
Count tied_pairs(std::size_t n, Eq&& same)
{
    Count total = 0;
    Count run = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (same(i - 1, i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total + run * (run - 1) / 2;
}

} // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("kendall_tau_b: length mismatch");
    const auto n = x.size();
    if (n < 2)
        throw UndefinedCorrelation("tau needs at least two ranked items");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    const Count pairs = static_cast<Count>(n) * static_cast<Count>(n - 1) / 2;
    const Count x_ties = tied_pairs(n, [&](auto i, auto j) { return x[order[i]] == x[order[j]]; });
    const Count joint_ties = tied_pairs(
        n, [&](auto i, auto j) { return x[order[i]] == x[order[j]] && y[order[i]] == y[order[j]]; });

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = y[order[i]];
    const Count swaps = count_inversions(ys);
    const Count y_ties = tied_pairs(n, [&](auto i, auto j) { return ys[i] == ys[j]; });

    const double denom = std::sqrt(static_cast<double>(pairs - x_ties) * static_cast<double>(pairs - y_ties));
    if (denom == 0.0)
        throw UndefinedCorrelation("tau undefined: one ranking is constant");
    const Count concordant_minus_discordant = pairs - x_ties - y_ties + joint_ties - 2 * swaps;
    return static_cast<double>(concordant_minus_discordant) / denom;
}

double conversation_flow_krcc(const Conversation& conv)
{
    std::vector<double> order, position;
    for (const auto& t : conv.turns) {
        if (!t.answer.is_found() || t.answer.spans.empty())
            continue;
        order.push_back(static_cast<double>(t.index));
        position.push_back(static_cast<double>(t.answer.spans.front().start));
    }
    if (order.size() < 2)
        throw UndefinedCorrelation("conversation '" + conv.id() + "' has fewer than two answered turns");
    return kendall_tau_b(order, position);
}

FlowResult conversation_flow(const Dataset& ds)
{
    FlowResult r;
    std::vector<double> taus;
    for (const auto& c : ds.conversations) {
        try {
            const auto tau = conversation_flow_krcc(c);
            const auto n = static_cast<std::size_t>(std::count_if(
                c.turns.begin(), c.turns.end(), [](const Turn& t) { return t.answer.is_found(); }));
            r.per_conversation.push_back({c.id(), tau, n});
            taus.push_back(tau);
        } catch (const UndefinedCorrelation&) {
            ++r.excluded;
        }
    }
    r.mean = mean(taus);
    return r;
}

// ---------------------------------------------------------------------------

std::string normalize_answer(std::string_view s)
{
    std::string stripped;
    stripped.reserve(s.size());
    for (const char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u))
            continue;
        stripped.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
    std::vector<std::string> kept;
    for (const auto tok : text::split_whitespace(stripped))
        if (tok != "a" && tok != "an" && tok != "the")
            kept.emplace_back(tok);
    return text::join(kept, " ");
}

std::vector<std::string> answer_tokens(std::string_view s)
{
    std::vector<std::string> out;
    const auto norm = normalize_answer(s);
    for (const auto tok : text::split_whitespace(norm))
        out.emplace_back(tok);
    return out;
}

TokenScore score_text(const std::optional<std::string>& predicted, const std::optional<std::string>& gold)
{
    if (!predicted && !gold)
        return {1.0, 1.0, 1.0, true};
    if (!predicted || !gold)
        return {};

    TokenScore s;
    s.em = normalize_answer(*predicted) == normalize_answer(*gold);
    const auto p = answer_tokens(*predicted);
    const auto g = answer_tokens(*gold);
    if (p.empty() || g.empty()) {
        const double v = p == g ? 1.0 : 0.0;
        s.precision = s.recall = s.f1 = v;
        return s;
    }
    std::map<std::string, long> counts;
    for (const auto& t : g)
        ++counts[t];
    long common = 0;
    for (const auto& t : p)
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    if (common == 0)
        return s;
    s.precision = static_cast<double>(common) / static_cast<double>(p.size());
    s.recall = static_cast<double>(common) / static_cast<double>(g.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

namespace {

std::optional<std::string> scored_text(const Answer& a)
{
    if (!a.is_found())
        return std::nullopt;
    return a.serialized();
}

std::optional<std::string> prediction_value(const json& v)
{
    if (v.is_null())
        return std::nullopt;
    if (!v.is_string())
        throw MalformedFile("prediction text is not a string");
    const auto s = v.get<std::string>();
    if (text::trim(s) == kQuacCannotAnswer || is_cannot_find_phrase(s))
        return std::nullopt;
    return s;
}

} // namespace

TokenScore token_score(const Answer& predicted, const Answer& gold)
{
    return score_text(scored_text(predicted), scored_text(gold));
}

Predictions load_predictions(const std::filesystem::path& path)
{
    const auto contents = read_file(path);
    Predictions out;
    auto add = [&](const std::string& id, std::optional<std::string> v) {
        if (!out.emplace(id, std::move(v)).second)
            throw MalformedFile(path.string() + ": duplicate prediction for '" + id + "'");
    };
    auto add_record = [&](const json& rec, const std::string& where) {
        if (!rec.is_object())
            throw MalformedFile(where + ": prediction record is not an object");
        std::string id;
        for (const char* k : {"question_id", "id", "qid"})
            if (rec.contains(k) && rec[k].is_string()) {
                id = rec[k].get<std::string>();
                break;
            }
        if (id.empty())
            throw MalformedFile(where + ": prediction record without question_id");
        if (rec.value("cannot_answer", false)) {
            add(id, std::nullopt);
            return;
        }
        for (const char* k : {"answer_text", "answer", "prediction_text", "text"})
            if (rec.contains(k)) {
                add(id, prediction_value(rec[k]));
                return;
            }
        throw MalformedFile(where + ": prediction record without answer_text");
    };

    if (text::trim(contents).empty())
        return out;
    json doc;
    bool whole = true;
    try {
        doc = json::parse(contents);
    } catch (const json::parse_error&) {
        whole = false;
    }
    if (whole && doc.is_object() && !doc.contains("question_id")) {
        for (const auto& [id, v] : doc.items())
            add(id, prediction_value(v));
        return out;
    }
    if (whole && doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i)
            add_record(doc[i], path.string() + "[" + std::to_string(i) + "]");
        return out;
    }
    if (whole) {
        add_record(doc, path.string());
        return out;
    }
    std::istringstream lines(contents);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (text::trim(line).empty())
            continue;
        const auto where = path.string() + ":" + std::to_string(lineno);
        try {
            add_record(json::parse(line), where);
        } catch (const json::parse_error& e) {
            throw MalformedFile(where + ": " + e.what());
        }
    }
    return out;
}

ScoreTable score_predictions(const Dataset& ds, const Predictions& predictions)
{
    std::set<std::string> known;
    for (const auto& c : ds.conversations)
        for (const auto& t : c.turns)
            known.insert(t.id);
    for (const auto& [id, v] : predictions)
        if (!known.count(id))
            throw UnknownQuestionId("prediction for unknown question id '" + id + "'");

    ScoreTable table;
    for (const auto& c : ds.conversations) {
        for (const auto& t : c.turns) {
            ++table.n_questions;
            const auto it = predictions.find(t.id);
            if (it == predictions.end()) {
                table.missing.push_back(t.id);
                continue;
            }
            const auto s = score_text(it->second, scored_text(t.answer));
            table.precision += s.precision;
            table.recall += s.recall;
            table.f1 += s.f1;
            table.em += s.em ? 1.0 : 0.0;
        }
    }
    if (table.n_questions > 0) {
        const auto n = static_cast<double>(table.n_questions);
        table.precision /= n;
        table.recall /= n;
        table.f1 /= n;
        table.em /= n;
    }
    return table;
}

// ---------------------------------------------------------------------------

const char* to_string(OverlapClass c)
{
    switch (c) {
    case OverlapClass::Same:
        return "Same";
    case OverlapClass::Overlap:
        return "Overlap";
    case OverlapClass::Different:
        return "Different";
    }
    return "unknown";
}

OverlapClass classify_answer_pair(const Answer& a, const Answer& b)
{
    if (!a.is_found() && !b.is_found())
        return OverlapClass::Same;
    if (a.is_found() != b.is_found())
        return OverlapClass::Different;
    const auto sa = a.serialized();
    const auto sb = b.serialized();
    const auto ta = text::trim(sa);
    const auto tb = text::trim(sb);
    if (ta == tb)
        return OverlapClass::Same;
    if (ta.find(tb) != std::string_view::npos || tb.find(ta) != std::string_view::npos)
        return OverlapClass::Overlap;
    return OverlapClass::Different;
}

double PairStats::percent(OverlapClass c) const
{
    if (total == 0)
        return 0.0;
    const auto it = by_class.find(c);
    return it == by_class.end() ? 0.0 : 100.0 * static_cast<double>(it->second) / static_cast<double>(total);
}

PairStats pair_stats(const Dataset& a, const Dataset& b)
{
    PairStats st;
    for (const auto& ca : a.conversations) {
        const auto* cb = b.find(ca.id());
        if (!cb)
            continue;
        if (ca.turns.size() != cb->turns.size())
            throw PairMismatch("conversation '" + ca.id() + "' has " + std::to_string(ca.turns.size()) + " vs " +
                               std::to_string(cb->turns.size()) + " turns");
        for (std::size_t i = 0; i < ca.turns.size(); ++i) {
            const auto& ta = ca.turns[i];
            const auto& tb = cb->turns[i];
            if (text::trim(ta.question) != text::trim(tb.question))
                throw PairMismatch("conversation '" + ca.id() + "' turn " + std::to_string(i) +
                                   ": questions differ");
            const auto cls = classify_answer_pair(ta.answer, tb.answer);
            ++st.total;
            ++st.by_class[cls];
            const bool a_none = !ta.answer.is_found();
            const bool b_none = !tb.answer.is_found();
            if (!b_none && tb.answer.spans.size() > 1)
                ++st.b_multi_span;
            std::string cond;
            if (a_none && b_none)
                cond = "both None";
            else if (a_none)
                cond = "a=None,b!=None";
            else if (b_none)
                cond = "b=None,a!=None";
            else
                cond = tb.answer.spans.size() > 1 ? "b not single" : "b single";
            ++st.by_condition[{cls, cond}];
        }
    }
    return st;
}

DatasetStats dataset_stats(const Dataset& ds)
{
    DatasetStats st;
    st.n_conversations = ds.conversations.size();
    double length_sum = 0.0;
    double spans_sum = 0.0;
    for (const auto& c : ds.conversations) {
        for (const auto& t : c.turns) {
            ++st.n_questions;
            if (!t.answer.is_found())
                continue;
            ++st.n_answered;
            length_sum += static_cast<double>(text::word_count(t.answer.serialized()));
            spans_sum += static_cast<double>(t.answer.spans.size());
        }
    }
    if (st.n_answered > 0) {
        st.avg_answer_length = length_sum / static_cast<double>(st.n_answered);
        st.avg_answers_per_question = spans_sum / static_cast<double>(st.n_answered);
    }
    return st;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("welch_t_test needs at least two samples per group");
    WelchResult r;
    r.mean_a = mean(a);
    r.mean_b = mean(b);
    const double va = sample_variance(a) / static_cast<double>(a.size());
    const double vb = sample_variance(b) / static_cast<double>(b.size());
    const double se2 = va + vb;
    if (se2 == 0.0) {
        r.t = r.mean_a == r.mean_b ? 0.0 : std::copysign(INFINITY, r.mean_a - r.mean_b);
        r.df = static_cast<double>(a.size() + b.size() - 2);
        r.p_two_tailed = r.mean_a == r.mean_b ? 1.0 : 0.0;
        return r;
    }
    r.t = (r.mean_a - r.mean_b) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(r.df);
    r.p_two_tailed = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    return r;
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins)
{
    if (bins == 0 || !(hi > lo))
        throw std::invalid_argument("histogram needs bins > 0 and hi > lo");
    Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
    for (const auto v : values) {
        if (v < lo || v > hi)
            continue;
        auto bin = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[std::min(bin, bins - 1)];
    }
    return h;
}

std::string Histogram::csv() const
{
    std::ostringstream out;
    out << "bin_lo,bin_hi,count\n";
    const auto width = (hi - lo) / static_cast<double>(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        out << lo + width * static_cast<double>(i) << ',' << lo + width * static_cast<double>(i + 1) << ','
            << counts[i] << '\n';
    return out.str();
}

} // namespace cqasim::metrics
