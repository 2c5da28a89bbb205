#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/attribution/adapters.hpp"
#include "ioev/intent/intent.hpp"
#include "ioev/ssa/retrieval.hpp"

namespace ioev::ssa {

enum class Audience { driver, operator_role };
enum class ResponseBackend { template_backend, remote_llm };

std::string to_string(Audience a);
Audience parse_audience(const std::string& s);
std::string to_string(ResponseBackend b);

using Payload = std::variant<battery::TelemetryWindow, ids::FlowRecord>;

// Exactly one of battery / attack is set.
struct Findings {
    std::optional<battery::BatteryDiagnosis> battery;
    std::optional<ids::AttackPrediction> attack;

    std::string tool() const;
    nlohmann::json to_json() const;
};

struct ToolOutput {
    Findings findings;
    attribution::Attribution attribution;
};

struct ToolDescriptor {
    std::string name;
    std::vector<intent::IntentLabel> serves;
    std::string schema_fingerprint;
    // Throws PayloadSchemaMismatch when the payload does not fit the tool.
    std::function<ToolOutput(const Payload&)> invoke;
};

ToolDescriptor battery_tool(std::shared_ptr<const battery::MultiTaskModel> model, attribution::BackgroundSet bg,
                            attribution::ShapleyOptions opts = {});
ToolDescriptor ids_tool(std::shared_ptr<const ids::Detector> detector, attribution::BackgroundSet bg,
                        attribution::ShapleyOptions opts = {});

// Routes intents 1 and 2. Construction throws InvalidArgument unless each of
// those labels is served by exactly one tool and label 0 by none.
class ToolRegistry {
public:
    explicit ToolRegistry(std::vector<ToolDescriptor> tools);

    const ToolDescriptor& tool_for(intent::IntentLabel label) const;
    const std::vector<ToolDescriptor>& tools() const { return tools_; }

private:
    std::vector<ToolDescriptor> tools_;
};

// Throws NoToolForIntent for label 0 and PayloadSchemaMismatch for a payload of the wrong kind.
ToolOutput route_and_invoke(const ToolRegistry& registry, const intent::IntentResult& intent, const Payload& payload);

struct PromptConfig {
    size_t token_budget = 600;  // whitespace-separated tokens
    size_t top_k = 5;
};

const std::string& role_framing(Audience a);

struct Prompt {
    std::string text;
    Audience audience = Audience::driver;
    Findings findings;
    attribution::Attribution attribution;
    std::vector<std::string> citations;  // doc_ids of the snippets that made it into text
    size_t top_k = 5;
};

size_t count_tokens(const std::string& text);

// Role framing, findings, top-k signed attributions and snippets. Snippets are
// truncated, then dropped, to respect the budget; BudgetTooSmall when the
// fixed part alone exceeds it.
Prompt build_prompt(const Findings& findings, const attribution::Attribution& attr,
                    const std::vector<ScoredChunk>& chunks, Audience audience, const PromptConfig& cfg = {});

struct AssistantResponse {
    Audience audience = Audience::driver;
    std::string summary;
    Findings findings;
    attribution::Attribution attribution;
    std::vector<std::string> citations;
    ResponseBackend backend = ResponseBackend::template_backend;
    bool degraded = false;  // remote backend failed and the template answered

    nlohmann::json to_json() const;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Throws RemoteUnavailable on any transport or protocol failure.
    virtual std::string complete(const std::string& system, const std::string& user) const = 0;
};

// OpenAI-style POST {base_url}/v1/chat/completions with temperature 0; the
// bearer token is read from the named environment variable when set.
struct RemoteChatConfig {
    std::string base_url;
    std::string model;
    std::string token_env = "IOEV_LLM_TOKEN";
    int timeout_seconds = 20;
};

class RemoteChatClient : public ChatClient {
public:
    explicit RemoteChatClient(RemoteChatConfig cfg) : cfg_(std::move(cfg)) {}
    std::string complete(const std::string& system, const std::string& user) const override;
    static nlohmann::json request_body(const RemoteChatConfig& cfg, const std::string& system, const std::string& user);

private:
    RemoteChatConfig cfg_;
};

// Deterministic narrative naming only features from the prompt's top-k set.
std::string template_summary(const Prompt& prompt);

// remote == nullptr selects the template backend. A failing remote falls back
// to the template with degraded set.
AssistantResponse compose_explanation(const Prompt& prompt, const ChatClient* remote = nullptr);

// Unigram F1 between candidate and reference, a stand-in for model-based scoring.
class ResponseScorer {
public:
    virtual ~ResponseScorer() = default;
    virtual double score(const std::string& candidate, const std::string& reference) const = 0;
};

class TokenOverlapScorer : public ResponseScorer {
public:
    double score(const std::string& candidate, const std::string& reference) const override;
};

struct SsaConfig {
    PromptConfig prompt;
    size_t retrieve_k = 3;
    Bm25Params bm25;
};

// Stateless per request; registry and store are shared read-only.
class SafetySecurityAgent {
public:
    SafetySecurityAgent(std::shared_ptr<const ToolRegistry> registry, std::shared_ptr<const std::vector<DocumentChunk>> store,
                        SsaConfig cfg = {}, std::shared_ptr<const ChatClient> remote = nullptr);

    AssistantResponse handle(const intent::IntentResult& intent, const Payload& payload, const std::string& query,
                             Audience audience) const;

private:
    std::shared_ptr<const ToolRegistry> registry_;
    std::shared_ptr<const std::vector<DocumentChunk>> store_;
    SsaConfig cfg_;
    std::shared_ptr<const ChatClient> remote_;
};

}  // namespace ioev::ssa
