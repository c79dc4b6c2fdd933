#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cqasim::chat {

enum class Role { System, Agent, Counterpart };

const char* to_string(Role role);

struct ChatMessage {
    Role role = Role::Counterpart;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatParams {
    double temperature = 1.0;
    int max_output_tokens = 256;
};

/// One stateful LLM conversation. The instruction prompt is sent as the first
/// message, joined with whatever the first complete() call carries.
struct ChatSession {
    std::string backend_id;
    /// "<conversation id>/<role>"; scripted backends key replies on it.
    std::string label;
    std::string instruction;
    std::vector<ChatMessage> history;
    ChatParams params;

    static ChatSession open(std::string backend_id, std::string label, std::string instruction,
                            ChatParams params = {});
    std::size_t agent_turns() const;
};

class ChatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BackendUnavailable : public ChatError {
public:
    using ChatError::ChatError;
};

class RateLimited : public ChatError {
public:
    RateLimited(const std::string& what, std::optional<std::chrono::seconds> retry_after)
        : ChatError(what)
        , retry_after_(retry_after)
    {
    }
    std::optional<std::chrono::seconds> retry_after() const { return retry_after_; }

private:
    std::optional<std::chrono::seconds> retry_after_;
};

class EmptyCompletion : public ChatError {
public:
    using ChatError::ChatError;
};

/// Non-retryable rejection (4xx other than 429, undecodable body).
class BackendRejected : public ChatError {
public:
    using ChatError::ChatError;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string id() const = 0;
    /// Returns the model reply to `messages` (the session history plus the new
    /// message). Must be safe to call concurrently for distinct sessions.
    virtual std::string reply(const ChatSession& session, std::span<const ChatMessage> messages) = 0;
};

/// Sends `content` and returns the reply verbatim. On success the history grows
/// by exactly two messages; on failure it is left untouched.
std::string complete(ChatBackend& backend, ChatSession& session, std::string_view content);

enum class ExhaustedBehavior { RepeatLast, Error };

/// Canned replies indexed by how many replies the session already received.
/// Lookup order: exact session label, then role (label suffix after the last
/// '/'), then the default script.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> responses = {},
                             ExhaustedBehavior exhausted = ExhaustedBehavior::RepeatLast,
                             std::string id = "scripted");

    void set_session_script(const std::string& label, std::vector<std::string> responses);
    void set_role_script(const std::string& role, std::vector<std::string> responses);

    std::string id() const override { return id_; }
    std::string reply(const ChatSession& session, std::span<const ChatMessage> messages) override;

    nlohmann::json to_json() const;
    static ScriptedBackend from_json(const nlohmann::json& j, std::string id = "scripted");
    static ScriptedBackend from_file(const std::filesystem::path& path);

private:
    const std::vector<std::string>& script_for(const std::string& label) const;

    std::vector<std::string> default_;
    std::map<std::string, std::vector<std::string>> by_role_;
    std::map<std::string, std::vector<std::string>> by_session_;
    ExhaustedBehavior exhausted_;
    std::string id_;
};

/// Forwards to another backend and keeps every successful reply so the run can
/// be replayed later through ScriptedBackend.
class RecordingBackend : public ChatBackend {
public:
    explicit RecordingBackend(ChatBackend& inner);

    std::string id() const override { return inner_.id(); }
    std::string reply(const ChatSession& session, std::span<const ChatMessage> messages) override;

    nlohmann::json transcript() const;
    void save(const std::filesystem::path& path) const;

private:
    ChatBackend& inner_;
    mutable std::mutex mutex_;
    std::map<std::string, std::map<std::size_t, std::string>> replies_;
};

struct RemoteConfig {
    /// Full URL of the chat-completions endpoint, e.g.
    /// https://api.openai.com/v1/chat/completions
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{120};
};

/// Speaks the standard chat-completion message-array protocol over HTTP(S).
/// Transport failures and 5xx responses are retried with exponential backoff.
class RemoteBackend : public ChatBackend {
public:
    explicit RemoteBackend(RemoteConfig config);

    std::string id() const override { return "remote:" + config_.model; }
    std::string reply(const ChatSession& session, std::span<const ChatMessage> messages) override;

    nlohmann::json request_body(const ChatSession& session, std::span<const ChatMessage> messages) const;

private:
    RemoteConfig config_;
    std::string origin_;
    std::string path_;
};

} // namespace cqasim::chat
