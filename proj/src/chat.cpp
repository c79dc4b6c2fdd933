#include "cqasim/chat.hpp"
#include "cqasim/corpus.hpp"
#include "cqasim/text.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

namespace cqasim::chat {

using nlohmann::json;

const char* to_string(Role role)
{
    switch (role) {
    case Role::System:
        return "system";
    case Role::Agent:
        return "agent";
    case Role::Counterpart:
        return "counterpart";
    }
    return "unknown";
}

ChatSession ChatSession::open(std::string backend_id, std::string label, std::string instruction,
                              ChatParams params)
{
    if (text::trim(instruction).empty())
        throw std::invalid_argument("chat session needs a non-empty instruction");
    ChatSession s;
    s.backend_id = std::move(backend_id);
    s.label = std::move(label);
    s.instruction = std::move(instruction);
    s.params = params;
    return s;
}

std::size_t ChatSession::agent_turns() const
{
    std::size_t n = 0;
    for (const auto& m : history)
        if (m.role == Role::Agent)
            ++n;
    return n;
}

std::string complete(ChatBackend& backend, ChatSession& session, std::string_view content)
{
    ChatMessage outgoing{Role::Counterpart, {}};
    if (session.history.empty()) {
        outgoing.content = session.instruction;
        if (!content.empty()) {
            outgoing.content += "\n\n";
            outgoing.content += content;
        }
    } else {
        if (text::trim(content).empty())
            throw std::invalid_argument("chat message content must be non-empty");
        outgoing.content = std::string(content);
    }

    std::vector<ChatMessage> messages = session.history;
    messages.push_back(outgoing);
    auto reply = backend.reply(session, messages);
    if (text::trim(reply).empty())
        throw EmptyCompletion("backend '" + backend.id() + "' returned an empty completion");

    session.history.push_back(std::move(outgoing));
    session.history.push_back({Role::Agent, reply});
    return reply;
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, ExhaustedBehavior exhausted, std::string id)
    : default_(std::move(responses))
    , exhausted_(exhausted)
    , id_(std::move(id))
{
}

void ScriptedBackend::set_session_script(const std::string& label, std::vector<std::string> responses)
{
    by_session_[label] = std::move(responses);
}

void ScriptedBackend::set_role_script(const std::string& role, std::vector<std::string> responses)
{
    by_role_[role] = std::move(responses);
}

const std::vector<std::string>& ScriptedBackend::script_for(const std::string& label) const
{
    if (auto it = by_session_.find(label); it != by_session_.end())
        return it->second;
    const auto slash = label.rfind('/');
    const auto role = slash == std::string::npos ? label : label.substr(slash + 1);
    if (auto it = by_role_.find(role); it != by_role_.end())
        return it->second;
    return default_;
}

std::string ScriptedBackend::reply(const ChatSession& session, std::span<const ChatMessage>)
{
    const auto& script = script_for(session.label);
    const auto k = session.agent_turns();
    if (k < script.size())
        return script[k];
    if (exhausted_ == ExhaustedBehavior::RepeatLast && !script.empty())
        return script.back();
    throw EmptyCompletion("script for session '" + session.label + "' exhausted after " +
                          std::to_string(script.size()) + " replies");
}

json ScriptedBackend::to_json() const
{
    json j;
    j["exhausted_behavior"] = exhausted_ == ExhaustedBehavior::RepeatLast ? "repeat_last" : "error";
    j["responses"] = default_;
    j["roles"] = by_role_;
    j["sessions"] = by_session_;
    return j;
}

ScriptedBackend ScriptedBackend::from_json(const json& j, std::string id)
{
    if (j.is_array())
        return ScriptedBackend(j.get<std::vector<std::string>>(), ExhaustedBehavior::RepeatLast, std::move(id));
    if (!j.is_object())
        throw MalformedFile("script must be an object or an array of strings");
    auto behavior = ExhaustedBehavior::RepeatLast;
    const auto b = j.value("exhausted_behavior", std::string("repeat_last"));
    if (b == "error")
        behavior = ExhaustedBehavior::Error;
    else if (b != "repeat_last")
        throw MalformedFile("unknown exhausted_behavior '" + b + "'");
    try {
        ScriptedBackend backend(j.value("responses", std::vector<std::string>{}), behavior, std::move(id));
        if (j.contains("roles"))
            for (const auto& [role, lines] : j.at("roles").items())
                backend.set_role_script(role, lines.get<std::vector<std::string>>());
        if (j.contains("sessions"))
            for (const auto& [label, lines] : j.at("sessions").items())
                backend.set_session_script(label, lines.get<std::vector<std::string>>());
        return backend;
    } catch (const json::exception& e) {
        throw MalformedFile(std::string("bad script: ") + e.what());
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
    return from_json(j, "scripted:" + path.filename().string());
}

// ---------------------------------------------------------------------------

RecordingBackend::RecordingBackend(ChatBackend& inner)
    : inner_(inner)
{
}

std::string RecordingBackend::reply(const ChatSession& session, std::span<const ChatMessage> messages)
{
    auto r = inner_.reply(session, messages);
    std::lock_guard lock(mutex_);
    replies_[session.label][session.agent_turns()] = r;
    return r;
}

json RecordingBackend::transcript() const
{
    std::lock_guard lock(mutex_);
    json sessions = json::object();
    for (const auto& [label, by_turn] : replies_) {
        auto& lines = sessions[label] = json::array();
        for (const auto& [turn, r] : by_turn) {
            (void)turn;
            lines.push_back(r);
        }
    }
    return {{"exhausted_behavior", "error"},
            {"responses", json::array()},
            {"roles", json::object()},
            {"sessions", sessions}};
}

void RecordingBackend::save(const std::filesystem::path& path) const
{
    write_file_atomic(path, transcript().dump(2) + "\n");
}

// ---------------------------------------------------------------------------

namespace {

const char* wire_role(Role role)
{
    switch (role) {
    case Role::System:
        return "system";
    case Role::Agent:
        return "assistant";
    case Role::Counterpart:
        return "user";
    }
    return "user";
}

} // namespace

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config))
{
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url_re))
        throw std::invalid_argument("endpoint must be an http(s) URL: " + config_.endpoint);
    origin_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
    if (config_.max_attempts < 1)
        throw std::invalid_argument("max_attempts must be >= 1");
}

json RemoteBackend::request_body(const ChatSession& session, std::span<const ChatMessage> messages) const
{
    json body;
    body["model"] = config_.model;
    body["temperature"] = session.params.temperature;
    body["max_tokens"] = session.params.max_output_tokens;
    body["messages"] = json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", wire_role(m.role)}, {"content", m.content}});
    return body;
}

std::string RemoteBackend::reply(const ChatSession& session, std::span<const ChatMessage> messages)
{
    const auto body = request_body(session, messages).dump();
    httplib::Headers headers;
    if (!config_.api_key_env.empty())
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_failure;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(origin_);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count());
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count());
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429) {
            std::optional<std::chrono::seconds> retry_after;
            if (res->has_header("Retry-After")) {
                try {
                    retry_after = std::chrono::seconds(std::stol(res->get_header_value("Retry-After")));
                } catch (const std::exception&) {
                }
            }
            throw RateLimited("rate limited by " + origin_, retry_after);
        }
        if (res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendRejected("HTTP " + std::to_string(res->status) + " from " + origin_ + ": " + res->body);
        try {
            const auto j = json::parse(res->body);
            const auto& content = j.at("choices").at(0).at("message").at("content");
            auto out = content.is_string() ? content.get<std::string>() : std::string{};
            if (text::trim(out).empty())
                throw EmptyCompletion("empty completion from " + origin_);
            return out;
        } catch (const json::exception& e) {
            throw BackendRejected(std::string("undecodable completion: ") + e.what());
        }
    }
    throw BackendUnavailable(origin_ + " unavailable after " + std::to_string(config_.max_attempts) +
                             " attempts (" + last_failure + ")");
}

} // namespace cqasim::chat
