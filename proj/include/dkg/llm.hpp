#pragma once
// Chat-completions style LLM access plus prompt templates.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include "dkg/error.hpp"
#include "dkg/graph.hpp"

namespace dkg {

struct ChatRequest {
    std::string system;
    std::string user;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the assistant message content. Throws Errc::Upstream on
    // transport failure or a non-2xx status.
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string model() const = 0;
};

struct LlmSettings {
    std::string base_url = "http://127.0.0.1:8081/v1";
    std::string model = "mock-llm";
    std::string api_key;
    int timeout_ms = 10000;
    int max_in_flight = 4;
    double temperature = 0.0;

    // DKG_LLM_BASE_URL, DKG_LLM_MODEL, DKG_LLM_API_KEY override the fields.
    LlmSettings with_env_overrides() const;
};

// POSTs {base_url}/chat/completions. At most `max_in_flight` requests are
// outstanding at once across threads.
class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(LlmSettings settings);

    std::string complete(const ChatRequest& request) override;
    std::string model() const override { return settings_.model; }

private:
    LlmSettings settings_;
    std::string host_;  // scheme://host:port
    std::string path_prefix_;
    std::counting_semaphore<1024> slots_;
};

// Text template with {{name}} placeholders.
class PromptTemplate {
public:
    PromptTemplate() = default;
    explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

    // Falls back to `fallback` when the file does not exist.
    static PromptTemplate load_or(const std::filesystem::path& path, std::string fallback);

    std::string render(const std::map<std::string, std::string>& values) const;
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

// Parses `content` as exactly one JSON object, nothing before or after it.
std::optional<json> parse_strict_object(std::string_view content);

namespace prompts {
extern const char* const kScoreSystem;
extern const char* const kScoreUser;
extern const char* const kAnswerSystem;
extern const char* const kAnswerUser;
extern const char* const kRiskSystem;
extern const char* const kRiskUser;
} // namespace prompts

} // namespace dkg
