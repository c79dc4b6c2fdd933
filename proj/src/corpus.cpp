#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace cqasim {

using nlohmann::json;

OffsetMismatch::OffsetMismatch(std::string qa_id, const std::string& detail)
    : CorpusError("offset mismatch in QA '" + qa_id + "': " + detail)
    , qa_id_(std::move(qa_id))
{
}

void TopicContext::validate() const
{
    const auto where = " (context '" + id + "')";
    if (id.empty())
        throw MalformedFile("context id is empty");
    if (text::trim(title).empty())
        throw MalformedFile("title is empty" + where);
    if (text::trim(section_header).empty())
        throw MalformedFile("section_header is empty" + where);
    if (text::trim(section_text).empty())
        throw MalformedFile("section_text is empty" + where);
}

Answer Answer::cannot_find(int attempts)
{
    Answer a;
    a.kind = AnswerKind::CannotFind;
    a.raw_text = std::string(kCannotFindPhrase);
    a.attempts = attempts;
    return a;
}

Answer Answer::found(std::vector<AnswerSpan> spans, std::string raw_text, int attempts)
{
    if (spans.empty())
        throw std::invalid_argument("a found answer needs at least one span");
    Answer a;
    a.kind = AnswerKind::Found;
    a.spans = std::move(spans);
    a.raw_text = std::move(raw_text);
    a.attempts = attempts;
    return a;
}

std::string Answer::serialized() const
{
    if (kind == AnswerKind::CannotFind)
        return std::string(kCannotFindPhrase);
    std::vector<std::string> parts;
    parts.reserve(spans.size());
    for (const auto& s : spans)
        parts.push_back(s.text);
    return text::join(parts, "; ");
}

bool is_cannot_find_phrase(std::string_view raw)
{
    // The instruction shows the phrase in curly quotes and models often echo them.
    static constexpr std::string_view quotes[] = {"\"", "'", "\u2018", "\u2019", "\u201c", "\u201d"};
    auto strip = [](std::string_view t) {
        t = text::trim(t);
        for (bool changed = true; changed && !t.empty();) {
            changed = false;
            if (t.back() == '.' || t.back() == '!') {
                t.remove_suffix(1);
                changed = true;
            }
            for (const auto q : quotes) {
                if (t.starts_with(q)) {
                    t.remove_prefix(q.size());
                    changed = true;
                }
                if (t.ends_with(q)) {
                    t.remove_suffix(q.size());
                    changed = true;
                }
            }
        }
        return text::trim(t);
    };
    return text::to_lower_ascii(strip(raw)) == "i cannot find the answer";
}

const Conversation* Dataset::find(std::string_view conversation_id) const
{
    for (const auto& c : conversations)
        if (c.id() == conversation_id)
            return &c;
    return nullptr;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IoFailure("read error on '" + path.string() + "'");
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoFailure("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out)
            throw IoFailure("write error on '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoFailure("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace {

struct RecordCursor {
    const LoadOptions& options;
    std::vector<std::string>* diagnostics;
    std::set<std::string> seen_ids;
    Dataset& out;
};

std::string string_field(const json& j, std::initializer_list<const char*> names, const std::string& locator,
                         bool required = true)
{
    for (const char* n : names) {
        auto it = j.find(n);
        if (it != j.end() && !it->is_null()) {
            if (!it->is_string())
                throw MalformedFile(locator + ": field '" + n + "' is not a string");
            return it->get<std::string>();
        }
    }
    if (required)
        throw MalformedFile(locator + ": missing field '" + *names.begin() + "'");
    return {};
}

bool is_unanswerable_text(std::string_view t)
{
    return text::trim(t) == kQuacCannotAnswer || is_cannot_find_phrase(t);
}

std::size_t token_to_char_offset(std::string_view doc, std::size_t token_index, const std::string& qa_id)
{
    const auto tokens = text::split_whitespace(doc);
    if (token_index >= tokens.size())
        throw OffsetMismatch(qa_id, "token offset " + std::to_string(token_index) + " beyond section text");
    const auto byte = static_cast<std::size_t>(tokens[token_index].data() - doc.data());
    return text::byte_to_codepoint(doc, byte);
}

AnswerSpan resolve_span(const json& a, const TopicContext& ctx, const std::string& qa_id,
                        const LoadOptions& options, std::unique_ptr<text::SpanLocator>& locator,
                        const std::string& where)
{
    if (!a.is_object())
        throw MalformedFile(where + ": answer entry is not an object");
    const auto answer_text = string_field(a, {"text"}, where);
    if (text::trim(answer_text).empty())
        throw MalformedFile(where + ": empty answer text");
    const std::string_view doc = ctx.section_text;
    const auto doc_len = text::codepoint_count(doc);

    long long start = -1;
    if (auto it = a.find("answer_start"); it != a.end() && !it->is_null()) {
        if (!it->is_number_integer())
            throw MalformedFile(where + ": answer_start is not an integer");
        start = it->get<long long>();
    }
    if (start >= 0) {
        auto begin = static_cast<std::size_t>(start);
        if (options.offset_unit == OffsetUnit::Token)
            begin = token_to_char_offset(doc, begin, qa_id);
        const auto end = begin + text::codepoint_count(answer_text);
        if (end > doc_len)
            throw OffsetMismatch(qa_id, "span [" + std::to_string(begin) + "," + std::to_string(end) +
                                            ") exceeds section text length " + std::to_string(doc_len));
        auto at_offset = text::substr_codepoints(doc, begin, end);
        if (at_offset != answer_text)
            throw OffsetMismatch(qa_id, "text at offset " + std::to_string(begin) + " is \"" + at_offset +
                                            "\", stored answer is \"" + answer_text + "\"");
        return {answer_text, begin, end};
    }

    if (!locator)
        locator = std::make_unique<text::SpanLocator>(doc);
    const auto m = locator->find(answer_text);
    if (!m)
        throw OffsetMismatch(qa_id, "answer \"" + answer_text + "\" has no offset and is not in the section text");
    return {text::substr_codepoints(doc, m->interval.start, m->interval.end), m->interval.start, m->interval.end};
}

std::vector<std::string> text_pieces(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t from = 0;
    for (auto at = s.find("; "); at != std::string::npos; at = s.find("; ", from)) {
        out.push_back(s.substr(from, at - from));
        from = at + 2;
    }
    out.push_back(s.substr(from));
    return out;
}

std::vector<std::string> string_list(const json& j, const char* name, const std::string& where)
{
    std::vector<std::string> out;
    auto it = j.find(name);
    if (it == j.end() || it->is_null())
        return out;
    if (!it->is_array())
        throw MalformedFile(where + ": '" + name + "' is not an array");
    for (const auto& v : *it) {
        if (!v.is_string())
            throw MalformedFile(where + ": '" + name + "' holds a non-string");
        out.push_back(v.get<std::string>());
    }
    return out;
}

Turn parse_qa(const json& qa, const TopicContext& ctx, std::size_t index, bool quac_layout,
              const LoadOptions& options, std::unique_ptr<text::SpanLocator>& locator,
              const std::string& locator_prefix)
{
    if (!qa.is_object())
        throw MalformedFile(locator_prefix + ": qas[" + std::to_string(index) + "] is not an object");
    Turn turn;
    turn.index = index;
    const auto default_id = ctx.id + "_q#" + std::to_string(index);
    turn.id = string_field(qa, {"id"}, locator_prefix, false);
    if (turn.id.empty())
        turn.id = default_id;
    const auto where = locator_prefix + ", QA '" + turn.id + "'";
    turn.question = string_field(qa, {"question"}, where);

    std::vector<json> gold;
    if (quac_layout && qa.contains("orig_answer") && qa["orig_answer"].is_object()) {
        gold.push_back(qa["orig_answer"]);
    } else if (auto it = qa.find("answers"); it != qa.end() && !it->is_null()) {
        if (!it->is_array())
            throw MalformedFile(where + ": 'answers' is not an array");
        if (quac_layout) {
            if (!it->empty())
                gold.push_back(it->front());
        } else {
            gold.assign(it->begin(), it->end());
        }
    } else if (auto at = qa.find("answer_text"); at != qa.end() && at->is_string()) {
        // Bare text without offsets; located in the section text below.
        for (const auto& piece : text_pieces(at->get<std::string>()))
            gold.push_back(json{{"text", piece}});
    }

    const bool flagged = qa.value("cannot_answer", false);
    const bool unanswerable =
        flagged || gold.empty() ||
        (gold.size() == 1 && gold.front().is_object() && gold.front().contains("text") &&
         gold.front()["text"].is_string() && is_unanswerable_text(gold.front()["text"].get<std::string>()));

    const int attempts = qa.value("attempts", 1);
    if (unanswerable) {
        turn.answer = Answer::cannot_find(attempts);
    } else {
        std::vector<AnswerSpan> spans;
        for (const auto& a : gold)
            spans.push_back(resolve_span(a, ctx, turn.id, options, locator, where));
        auto found = Answer::found(std::move(spans), "", attempts);
        found.raw_text = qa.contains("raw_text") && qa["raw_text"].is_string() ? qa["raw_text"].get<std::string>()
                                                                                : found.serialized();
        turn.answer = std::move(found);
    }

    if (auto it = qa.find("trace"); it != qa.end() && it->is_object()) {
        const auto& tr = *it;
        if (tr.contains("student_prompt") && tr["student_prompt"].is_string())
            turn.student_prompt_used = tr["student_prompt"].get<std::string>();
        turn.teacher_reprompts = string_list(tr, "teacher_reprompts", where);
        turn.student_attempts = tr.value("student_attempts", 1);
        turn.student_corrections = string_list(tr, "student_corrections", where);
    }
    return turn;
}

void parse_meta(const json& record, Conversation& conv)
{
    auto it = record.find("meta");
    if (it == record.end() || !it->is_object())
        return;
    const auto& meta = *it;
    conv.seed = meta.value("seed", std::uint64_t{0});
    conv.backend_id = meta.value("backend_id", std::string{});
    if (meta.contains("termination") && meta["termination"].is_string())
        conv.termination = meta["termination"].get<std::string>();
    if (meta.contains("config") && meta["config"].is_object())
        conv.config_snapshot = meta["config"].get<SimulationConfig>();
}

void add_conversation(RecordCursor& cursor, Conversation conv, const std::string& where)
{
    if (!cursor.seen_ids.insert(conv.id()).second)
        throw MalformedFile(where + ": duplicate conversation id '" + conv.id() + "'");
    cursor.out.conversations.push_back(std::move(conv));
}

template <typename Fn>
void guarded(RecordCursor& cursor, const std::string& where, Fn&& fn)
{
    try {
        fn();
    } catch (const CorpusError& e) {
        if (!cursor.diagnostics)
            throw;
        cursor.diagnostics->push_back(e.what());
    } catch (const json::exception& e) {
        if (!cursor.diagnostics)
            throw MalformedFile(where + ": " + e.what());
        cursor.diagnostics->push_back(where + ": " + e.what());
    }
}

void parse_native_record(RecordCursor& cursor, const json& record, const std::string& where)
{
    Conversation conv;
    const auto it = record.find("context");
    auto& ctx = conv.context;
    if (it != record.end() && it->is_object()) {
        const auto& c = *it;
        ctx.id = string_field(c, {"id", "context_id"}, where);
        ctx.title = string_field(c, {"title", "wikipedia_page_title"}, where);
        ctx.background = string_field(c, {"background"}, where, false);
        ctx.section_header = string_field(c, {"section_header", "section_title"}, where);
        ctx.section_text = string_field(c, {"section_text", "context", "text"}, where);
    } else {
        // Flat record with QuAC-style names at the top level.
        ctx.id = string_field(record, {"id", "context_id"}, where);
        ctx.title = string_field(record, {"title", "wikipedia_page_title"}, where);
        ctx.background = string_field(record, {"background"}, where, false);
        ctx.section_header = string_field(record, {"section_header", "section_title"}, where);
        ctx.section_text = string_field(record, {"section_text", "context"}, where);
    }
    const auto rec_where = where + " (context '" + ctx.id + "')";
    ctx.validate();
    std::unique_ptr<text::SpanLocator> locator;
    const auto qas = record.value("qas", json::array());
    if (!qas.is_array())
        throw MalformedFile(rec_where + ": 'qas' is not an array");
    for (std::size_t i = 0; i < qas.size(); ++i)
        conv.turns.push_back(parse_qa(qas[i], ctx, i, false, cursor.options, locator, rec_where));
    parse_meta(record, conv);
    add_conversation(cursor, std::move(conv), rec_where);
}

void parse_quac_article(RecordCursor& cursor, const json& article, const std::string& where)
{
    const auto title = string_field(article, {"title", "wikipedia_page_title"}, where);
    const auto background = string_field(article, {"background"}, where, false);
    const auto header = string_field(article, {"section_title", "section_header"}, where);
    const auto& paragraphs = article.at("paragraphs");
    if (!paragraphs.is_array())
        throw MalformedFile(where + ": 'paragraphs' is not an array");
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const auto p_where = where + ".paragraphs[" + std::to_string(p) + "]";
        guarded(cursor, p_where, [&] {
            const auto& para = paragraphs[p];
            Conversation conv;
            auto& ctx = conv.context;
            ctx.id = string_field(para, {"id", "context_id"}, p_where);
            ctx.title = title;
            ctx.background = background;
            ctx.section_header = header;
            ctx.section_text = string_field(para, {"context", "section_text"}, p_where);
            // QuAC appends the unanswerable marker to every context.
            const std::string_view marker = kQuacCannotAnswer;
            if (std::string_view(ctx.section_text).ends_with(marker)) {
                ctx.section_text.resize(ctx.section_text.size() - marker.size());
                while (!ctx.section_text.empty() && text::is_space(ctx.section_text.back()))
                    ctx.section_text.pop_back();
            }
            const auto rec_where = p_where + " (context '" + ctx.id + "')";
            ctx.validate();
            std::unique_ptr<text::SpanLocator> locator;
            const auto& qas = para.at("qas");
            if (!qas.is_array())
                throw MalformedFile(rec_where + ": 'qas' is not an array");
            for (std::size_t i = 0; i < qas.size(); ++i)
                conv.turns.push_back(parse_qa(qas[i], ctx, i, true, cursor.options, locator, rec_where));
            parse_meta(para, conv);
            add_conversation(cursor, std::move(conv), rec_where);
        });
    }
}

void parse_entry(RecordCursor& cursor, const json& entry, const std::string& where)
{
    if (!entry.is_object())
        throw MalformedFile(where + ": record is not an object");
    if (entry.contains("paragraphs")) {
        parse_quac_article(cursor, entry, where);
        return;
    }
    guarded(cursor, where, [&] {
        if (!entry.contains("context") && !entry.contains("section_text"))
            throw MalformedFile(where + ": record has neither 'context' nor 'paragraphs'");
        parse_native_record(cursor, entry, where);
    });
}

void parse_document(const json& doc, RecordCursor& cursor)
{
    const json* entries = nullptr;
    if (doc.is_object()) {
        if (doc.contains("name") && doc["name"].is_string())
            cursor.out.name = doc["name"].get<std::string>();
        auto it = doc.find("data");
        if (it == doc.end()) {
            // A single bare record.
            parse_entry(cursor, doc, "record 0");
            return;
        }
        entries = &*it;
    } else {
        entries = &doc;
    }
    if (!entries->is_array())
        throw MalformedFile("top level: 'data' is not an array");
    for (std::size_t i = 0; i < entries->size(); ++i)
        parse_entry(cursor, (*entries)[i], "data[" + std::to_string(i) + "]");
}

LoadResult load_impl(const std::filesystem::path& path, const LoadOptions& options, bool collect)
{
    const auto contents = read_file(path);
    LoadResult result;
    result.dataset.name = path.stem().string();
    RecordCursor cursor{options, collect ? &result.diagnostics : nullptr, {}, result.dataset};

    if (text::trim(contents).empty())
        return result;
    json doc;
    try {
        doc = json::parse(contents);
    } catch (const json::parse_error&) {
        // Line-delimited records.
        std::istringstream lines(contents);
        std::string line;
        std::size_t lineno = 0;
        doc = json::array();
        while (std::getline(lines, line)) {
            ++lineno;
            if (text::trim(line).empty())
                continue;
            try {
                doc.push_back(json::parse(line));
            } catch (const json::parse_error& e) {
                throw MalformedFile(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    parse_document(doc, cursor);
    return result;
}

json answer_to_json(const Turn& t)
{
    json qa;
    qa["id"] = t.id;
    qa["question"] = t.question;
    qa["answers"] = json::array();
    for (const auto& s : t.answer.spans)
        qa["answers"].push_back({{"text", s.text}, {"answer_start", s.start}});
    qa["answer_text"] = t.answer.serialized();
    qa["cannot_answer"] = !t.answer.is_found();
    qa["raw_text"] = t.answer.raw_text;
    qa["attempts"] = t.answer.attempts;
    json trace;
    trace["student_prompt"] = t.student_prompt_used ? json(*t.student_prompt_used) : json(nullptr);
    trace["teacher_reprompts"] = t.teacher_reprompts;
    trace["student_attempts"] = t.student_attempts;
    trace["student_corrections"] = t.student_corrections;
    qa["trace"] = std::move(trace);
    return qa;
}

} // namespace

json conversation_to_json(const Conversation& conv)
{
    json record;
    const auto& c = conv.context;
    record["context"] = {{"id", c.id},
                         {"title", c.title},
                         {"background", c.background},
                         {"section_header", c.section_header},
                         {"section_text", c.section_text}};
    record["qas"] = json::array();
    for (const auto& t : conv.turns)
        record["qas"].push_back(answer_to_json(t));
    if (conv.config_snapshot || !conv.backend_id.empty() || conv.termination || conv.seed != 0) {
        json meta;
        meta["seed"] = conv.seed;
        meta["backend_id"] = conv.backend_id;
        meta["termination"] = conv.termination ? json(*conv.termination) : json(nullptr);
        meta["config"] = conv.config_snapshot ? json(*conv.config_snapshot) : json(nullptr);
        record["meta"] = std::move(meta);
    }
    return record;
}

json dataset_to_json(const Dataset& ds)
{
    json doc;
    doc["version"] = 1;
    doc["name"] = ds.name;
    doc["data"] = json::array();
    for (const auto& conv : ds.conversations)
        doc["data"].push_back(conversation_to_json(conv));
    return doc;
}

Dataset dataset_from_json(const json& doc, std::string name, const LoadOptions& options)
{
    Dataset ds;
    ds.name = std::move(name);
    RecordCursor cursor{options, nullptr, {}, ds};
    parse_document(doc, cursor);
    return ds;
}

Dataset load_quac(const std::filesystem::path& path, const LoadOptions& options)
{
    return load_impl(path, options, false).dataset;
}

LoadResult load_quac_collect(const std::filesystem::path& path, const LoadOptions& options)
{
    return load_impl(path, options, true);
}

void export_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    std::set<std::string> ids;
    for (const auto& c : ds.conversations)
        if (!ids.insert(c.id()).second)
            throw MalformedFile("duplicate conversation id '" + c.id() + "' in dataset '" + ds.name + "'");
    write_file_atomic(path, dataset_to_json(ds).dump(1) + "\n");
}

std::string trace_lines(const Conversation& conv)
{
    std::string out;
    for (const auto& t : conv.turns) {
        json rec;
        rec["conversation_id"] = conv.id();
        rec["turn"] = t.index;
        rec["question_id"] = t.id;
        rec["teacher_attempts"] = t.answer.attempts;
        rec["teacher_reprompts"] = t.teacher_reprompts;
        rec["student_prompt"] = t.student_prompt_used ? json(*t.student_prompt_used) : json(nullptr);
        rec["student_attempts"] = t.student_attempts;
        rec["student_corrections"] = t.student_corrections;
        rec["answered"] = t.answer.is_found();
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void export_trace(const Dataset& ds, const std::filesystem::path& path)
{
    std::string out;
    for (const auto& conv : ds.conversations)
        out += trace_lines(conv);
    write_file_atomic(path, out);
}

Dataset filter_max_unanswered(const Dataset& ds, std::size_t limit)
{
    Dataset out;
    out.name = ds.name;
    out.conversations.reserve(ds.conversations.size());
    for (const auto& conv : ds.conversations) {
        Conversation kept = conv;
        kept.turns.clear();
        std::size_t unanswered = 0;
        for (const auto& t : conv.turns) {
            if (!t.answer.is_found() && unanswered++ >= limit)
                continue;
            kept.turns.push_back(t);
            kept.turns.back().index = kept.turns.size() - 1;
        }
        out.conversations.push_back(std::move(kept));
    }
    return out;
}

} // namespace cqasim
