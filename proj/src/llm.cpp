#include "dkg/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace dkg {

namespace prompts {

const char* const kScoreSystem =
    "You assess the reliability of facts in a patient knowledge graph. "
    "Reply with a single JSON object {\"score\": number in [0,1], \"rationale\": string} and nothing else.";

const char* const kScoreUser =
    "Target triple:\n{{target}}\n\n"
    "Context (current record first, then earlier records):\n{{context}}\n\n"
    "Evidence records for the target: {{evidence}}\n"
    "Rate how plausible the target triple is given the context, considering source quality, "
    "repetition across visits, co-occurring facts and temporal plausibility.";

const char* const kAnswerSystem =
    "You answer clinical questions using only the supplied knowledge-graph evidence.";

const char* const kAnswerUser =
    "Question: {{question}}\n\nEvidence ({{mode}}):\n{{evidence}}\n\nAnswer concisely and cite the evidence you used.";

const char* const kRiskSystem =
    "You estimate the probability of an adverse outcome at the next visit. "
    "Reply with a single JSON object {\"risk\": number in [0,1]} and nothing else.";

const char* const kRiskUser = "Patient graph ({{variant}}):\n{{triples}}";

} // namespace prompts

LlmSettings LlmSettings::with_env_overrides() const {
    LlmSettings out = *this;
    if (const char* v = std::getenv("DKG_LLM_BASE_URL"); v && *v) out.base_url = v;
    if (const char* v = std::getenv("DKG_LLM_MODEL"); v && *v) out.model = v;
    if (const char* v = std::getenv("DKG_LLM_API_KEY"); v && *v) out.api_key = v;
    return out;
}

HttpChatClient::HttpChatClient(LlmSettings settings)
    : settings_(std::move(settings)),
      slots_(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(settings_.max_in_flight, 1024))) {
    const auto& url = settings_.base_url;
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    host_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    json body{{"model", settings_.model},
              {"temperature", settings_.temperature},
              {"messages", json::array({json{{"role", "system"}, {"content", request.system}},
                                        json{{"role", "user"}, {"content", request.user}}})}};

    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};

    httplib::Client client(host_);
    const auto secs = settings_.timeout_ms / 1000;
    const auto usecs = (settings_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) fail(Errc::Upstream, "LLM endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        fail(Errc::Upstream, "LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
        const auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        fail(Errc::Upstream, std::string("malformed chat completion envelope: ") + e.what());
    }
}

PromptTemplate PromptTemplate::load_or(const std::filesystem::path& path, std::string fallback) {
    std::ifstream in(path);
    if (!in) return PromptTemplate(std::move(fallback));
    std::ostringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    // Editors add a final newline; the built-in prompts have none.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return PromptTemplate(std::move(text));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t i = 0;
    while (i < text_.size()) {
        const auto open = text_.find("{{", i);
        if (open == std::string::npos) break;
        const auto close = text_.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(text_, i, open - i);
        const auto name = text_.substr(open + 2, close - open - 2);
        if (auto it = values.find(name); it != values.end()) {
            out += it->second;
        } else {
            out.append(text_, open, close + 2 - open);
        }
        i = close + 2;
    }
    out.append(text_, i, std::string::npos);
    return out;
}

std::optional<json> parse_strict_object(std::string_view content) {
    json j = json::parse(content.begin(), content.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

} // namespace dkg
