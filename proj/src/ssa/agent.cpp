#include "ioev/ssa/agent.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::ssa {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

}  // namespace

std::string to_string(Audience a) { return a == Audience::driver ? "driver" : "operator"; }

Audience parse_audience(const std::string& s) {
    auto l = to_lower(trim(s));
    if (l == "driver") return Audience::driver;
    if (l == "operator") return Audience::operator_role;
    fail(ErrorCode::InvalidArgument, "unknown audience '" + s + "'");
}

std::string to_string(ResponseBackend b) { return b == ResponseBackend::template_backend ? "template" : "remote_llm"; }

std::string Findings::tool() const {
    if (battery) return "battery-analytics";
    if (attack) return "evcs-ids";
    return "none";
}

nlohmann::json Findings::to_json() const {
    nlohmann::json j = {{"tool", tool()}};
    if (battery) {
        j["battery"] = {{"soh_anomaly_prob", battery->soh_anomaly_prob},
                        {"soh_label", battery->soh_label},
                        {"soc_estimate", battery->soc_estimate},
                        {"model_id", battery->model_id}};
    }
    if (attack) {
        j["attack"] = {{"label", ids::to_string(attack->label)},
                       {"probabilities", std::vector<double>(attack->probabilities.begin(), attack->probabilities.end())}};
    }
    return j;
}

ToolDescriptor battery_tool(std::shared_ptr<const battery::MultiTaskModel> model, attribution::BackgroundSet bg,
                            attribution::ShapleyOptions opts) {
    require(model != nullptr, ErrorCode::ModelNotLoaded, "battery tool needs a model");
    ToolDescriptor t;
    t.name = "battery-analytics";
    t.serves = {intent::IntentLabel::battery_diagnostics};
    t.schema_fingerprint = "telemetry-window:" + std::to_string(battery::kWindowLength) + "x" +
                           std::to_string(battery::kNumChannels);
    t.invoke = [model, bg = std::move(bg), opts](const Payload& p) {
        const auto* w = std::get_if<battery::TelemetryWindow>(&p);
        require(w != nullptr, ErrorCode::PayloadSchemaMismatch, "battery tool expects a telemetry window");
        ToolOutput out;
        out.findings.battery = battery::infer_diagnosis(model, *w);
        out.attribution = attribution::explain_battery(*model, *w, bg, opts);
        return out;
    };
    return t;
}

ToolDescriptor ids_tool(std::shared_ptr<const ids::Detector> detector, attribution::BackgroundSet bg,
                        attribution::ShapleyOptions opts) {
    require(detector != nullptr, ErrorCode::ModelNotLoaded, "ids tool needs a detector");
    ToolDescriptor t;
    t.name = "evcs-ids";
    t.serves = {intent::IntentLabel::evcs_security};
    t.schema_fingerprint = detector->fingerprint();
    t.invoke = [detector, bg = std::move(bg), opts](const Payload& p) {
        const auto* f = std::get_if<ids::FlowRecord>(&p);
        require(f != nullptr, ErrorCode::PayloadSchemaMismatch, "ids tool expects a flow record");
        require(f->names == detector->feature_names(), ErrorCode::PayloadSchemaMismatch,
                "flow record columns do not match the detector schema");
        auto e = attribution::explain_flow(*detector, *f, bg, opts);
        ToolOutput out;
        out.findings.attack = e.prediction;
        out.attribution = std::move(e.attribution);
        return out;
    };
    return t;
}

ToolRegistry::ToolRegistry(std::vector<ToolDescriptor> tools) : tools_(std::move(tools)) {
    std::map<intent::IntentLabel, int> served;
    for (const auto& t : tools_) {
        require(static_cast<bool>(t.invoke), ErrorCode::InvalidArgument, "tool '" + t.name + "' has no invoke handle");
        for (auto l : t.serves) served[l]++;
    }
    require(served[intent::IntentLabel::user_support] == 0, ErrorCode::InvalidArgument,
            "user-support intents are not served by diagnostic tools");
    for (auto l : {intent::IntentLabel::evcs_security, intent::IntentLabel::battery_diagnostics}) {
        require(served[l] == 1, ErrorCode::InvalidArgument,
                "intent " + intent::to_string(l) + " must be served by exactly one tool");
    }
}

const ToolDescriptor& ToolRegistry::tool_for(intent::IntentLabel label) const {
    for (const auto& t : tools_) {
        if (std::find(t.serves.begin(), t.serves.end(), label) != t.serves.end()) return t;
    }
    fail(ErrorCode::NoToolForIntent, "no tool serves intent " + intent::to_string(label));
}

ToolOutput route_and_invoke(const ToolRegistry& registry, const intent::IntentResult& intent, const Payload& payload) {
    return registry.tool_for(intent.label).invoke(payload);
}

const std::string& role_framing(Audience a) {
    static const std::string driver =
        "You are an in-vehicle assistant talking to an electric vehicle driver. Explain the diagnostic result in "
        "plain language without technical jargon, say how confident the system is, and tell the driver what to do "
        "next. Do not invent numbers that are not listed below.";
    static const std::string op =
        "You are a security and reliability analyst assisting a charging-network operator. Report the verdict with "
        "its probability, name the features that drove it with their signed contributions, and recommend an "
        "operational response. Do not invent numbers that are not listed below.";
    return a == Audience::driver ? driver : op;
}

size_t count_tokens(const std::string& text) { return words(text).size(); }

namespace {

std::string findings_block(const Findings& f) {
    std::string s = "[findings]\ntool: " + f.tool() + "\n";
    if (f.battery) {
        s += "soh_anomaly_prob: " + fmt("%.4f", f.battery->soh_anomaly_prob) + "\n";
        s += "soh_label: " + std::string(f.battery->soh_label ? "degraded" : "healthy") + "\n";
        s += "soc_estimate: " + fmt("%.2f", f.battery->soc_estimate) + "\n";
        s += "model_id: " + f.battery->model_id + "\n";
    }
    if (f.attack) {
        s += "verdict: " + ids::to_string(f.attack->label) + "\n";
        s += "probabilities: benign=" + fmt("%.4f", f.attack->probabilities[0]) +
             " recon=" + fmt("%.4f", f.attack->probabilities[1]) + " dos=" + fmt("%.4f", f.attack->probabilities[2]) +
             "\n";
    }
    return s;
}

std::string attribution_block(const attribution::Attribution& a, size_t top_k) {
    auto wf = attribution::waterfall_data(a, top_k);
    std::string s = "[attribution]\nbase_value: " + fmt("%.4f", a.base_value) +
                    "\nprediction: " + fmt("%.4f", a.prediction) + "\n";
    for (size_t i = 0; i < wf.bars.size(); ++i) {
        const auto& b = wf.bars[i];
        s += std::to_string(i + 1) + ". " + b.feature + " = " + fmt("%.4g", b.value) +
             " phi=" + fmt("%+.4f", b.contribution) + "\n";
    }
    size_t rest = a.items.size() - wf.bars.size();
    if (rest > 0) {
        s += "(" + std::to_string(rest) + " further features contribute " + fmt("%+.4f", wf.remainder) + ")\n";
    }
    return s;
}

const char* task_line(Audience a) {
    return a == Audience::driver ? "[task]\nWrite a short explanation for the driver.\n"
                                 : "[task]\nWrite a concise incident note for the operator.\n";
}

}  // namespace

Prompt build_prompt(const Findings& findings, const attribution::Attribution& attr,
                    const std::vector<ScoredChunk>& chunks, Audience audience, const PromptConfig& cfg) {
    require(findings.battery.has_value() != findings.attack.has_value(), ErrorCode::InvalidArgument,
            "findings must hold exactly one tool result");
    require(cfg.top_k >= 1, ErrorCode::InvalidArgument, "top_k must be at least 1");

    std::string head = "[role]\n" + role_framing(audience) + "\n" + findings_block(findings) +
                       attribution_block(attr, cfg.top_k);
    std::string tail = task_line(audience);
    size_t fixed = count_tokens(head) + count_tokens(tail) + 1;  // +1 for the context header
    require(fixed <= cfg.token_budget, ErrorCode::BudgetTooSmall,
            "prompt budget of " + std::to_string(cfg.token_budget) + " tokens cannot hold the findings (" +
                std::to_string(fixed) + " needed)");

    Prompt p;
    p.audience = audience;
    p.findings = findings;
    p.attribution = attr;
    p.top_k = cfg.top_k;

    size_t left = cfg.token_budget - fixed;
    std::string context = "[context]\n";
    for (const auto& c : chunks) {
        // doc_id label + at least one word
        if (left < 2) break;
        auto w = words(c.chunk->text);
        std::string line = "(" + c.chunk->doc_id + ")";
        size_t take = std::min(w.size(), left - 1);
        bool truncated = take < w.size();
        if (truncated) {
            // leave room for the marker
            if (take < 2) break;
            --take;
        }
        for (size_t i = 0; i < take; ++i) line += " " + w[i];
        if (truncated) line += " [...]";
        left -= 1 + take + (truncated ? 1 : 0);
        context += line + "\n";
        p.citations.push_back(c.chunk->doc_id);
    }
    p.text = head + context + tail;
    return p;
}

std::string template_summary(const Prompt& prompt) {
    auto wf = attribution::waterfall_data(prompt.attribution, prompt.top_k);
    size_t named = std::min<size_t>(3, wf.bars.size());
    const bool driver = prompt.audience == Audience::driver;

    std::string drivers;
    for (size_t i = 0; i < named; ++i) {
        const auto& b = wf.bars[i];
        if (i > 0) drivers += (i + 1 == named) ? " and " : ", ";
        if (driver) {
            drivers += b.feature + (b.contribution >= 0 ? " (raised the score by " : " (lowered the score by ") +
                       fmt("%.4f", std::abs(b.contribution)) + ")";
        } else {
            drivers += b.feature + " " + fmt("%+.4f", b.contribution);
        }
    }

    std::string s;
    const auto& f = prompt.findings;
    if (f.battery) {
        const auto& d = *f.battery;
        const char* state = d.soh_label ? "degraded" : "healthy";
        if (driver) {
            s = "Battery health check: the pack looks " + std::string(state) + " (anomaly probability " +
                fmt("%.2f", d.soh_anomaly_prob) + "). Estimated state of charge is " + fmt("%.1f", d.soc_estimate) +
                ".";
            if (named > 0) s += " The result was driven mostly by " + drivers + ".";
            s += d.soh_label ? " Please have the battery inspected before long trips."
                             : " No action is needed.";
        } else {
            s = "Battery diagnosis (" + d.model_id + "): SoH anomaly probability " + fmt("%.4f", d.soh_anomaly_prob) +
                ", label " + state + ", SoC estimate " + fmt("%.2f", d.soc_estimate) + ".";
            if (named > 0) s += " Top attributions: " + drivers + ".";
            s += d.soh_label ? " Recommend a service inspection of this vehicle." : " No action required.";
        }
    } else if (f.attack) {
        const auto& a = *f.attack;
        auto label = ids::to_string(a.label);
        double p = a.probabilities[static_cast<size_t>(a.label)];
        bool benign = a.label == ids::AttackClass::benign;
        if (driver) {
            s = benign ? "The charging station's network traffic looks normal (confidence " + fmt("%.0f", 100 * p) +
                             "%)."
                       : "The charging station's network traffic looks like a " + label + " attack (confidence " +
                             fmt("%.0f", 100 * p) + "%).";
            if (named > 0) s += " The strongest signals were " + drivers + ".";
            s += benign ? " You can keep charging." : " Charging may be interrupted and the operator has been alerted.";
        } else {
            s = "Flow classified as " + label + " with probability " + fmt("%.4f", p) + ".";
            if (named > 0) s += " Top attributions: " + drivers + ".";
            s += benign ? " No action required." : " Recommend isolating the source and reviewing station logs.";
        }
    }
    return s;
}

nlohmann::json RemoteChatClient::request_body(const RemoteChatConfig& cfg, const std::string& system,
                                              const std::string& user) {
    return {{"model", cfg.model},
            {"temperature", 0},
            {"messages", nlohmann::json::array({{{"role", "system"}, {"content", system}},
                                                {{"role", "user"}, {"content", user}}})}};
}

std::string RemoteChatClient::complete(const std::string& system, const std::string& user) const {
    if (cfg_.base_url.empty()) fail(ErrorCode::RemoteUnavailable, "chat endpoint is not configured");
    // base_url may carry a path prefix such as /v1
    std::string origin = cfg_.base_url, prefix;
    auto scheme = origin.find("://");
    auto slash = origin.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash != std::string::npos) {
        prefix = origin.substr(slash);
        origin.resize(slash);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(cfg_.timeout_seconds);
    client.set_read_timeout(cfg_.timeout_seconds);
    httplib::Headers headers;
    if (const char* tok = std::getenv(cfg_.token_env.c_str()); tok && *tok) {
        headers.emplace("Authorization", std::string("Bearer ") + tok);
    }
    auto res = client.Post(prefix + "/chat/completions", headers, request_body(cfg_, system, user).dump(),
                           "application/json");
    if (!res) fail(ErrorCode::RemoteUnavailable, "chat endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorCode::RemoteUnavailable, "chat endpoint returned " + std::to_string(res->status));
    try {
        auto j = nlohmann::json::parse(res->body);
        auto content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (trim(content).empty()) fail(ErrorCode::RemoteUnavailable, "chat endpoint returned an empty reply");
        return content;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::RemoteUnavailable, std::string("malformed chat reply: ") + e.what());
    }
}

AssistantResponse compose_explanation(const Prompt& prompt, const ChatClient* remote) {
    AssistantResponse r;
    r.audience = prompt.audience;
    r.findings = prompt.findings;
    r.attribution = prompt.attribution;
    r.citations = prompt.citations;
    if (remote) {
        try {
            r.summary = remote->complete(role_framing(prompt.audience), prompt.text);
            r.backend = ResponseBackend::remote_llm;
            return r;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RemoteUnavailable) throw;
            r.degraded = true;
        }
    }
    r.summary = template_summary(prompt);
    r.backend = ResponseBackend::template_backend;
    return r;
}

nlohmann::json AssistantResponse::to_json() const {
    return {{"audience", to_string(audience)},   {"summary", summary},
            {"findings", findings.to_json()},    {"attribution", attribution.to_json()},
            {"citations", citations},            {"backend", to_string(backend)},
            {"degraded", degraded}};
}

double TokenOverlapScorer::score(const std::string& candidate, const std::string& reference) const {
    auto c = lexical_terms(candidate);
    auto r = lexical_terms(reference);
    if (c.empty() || r.empty()) return 0.0;
    std::map<std::string, int> rc;
    for (const auto& t : r) rc[t]++;
    double overlap = 0.0;
    for (const auto& t : c) {
        auto it = rc.find(t);
        if (it != rc.end() && it->second > 0) {
            --it->second;
            overlap += 1.0;
        }
    }
    if (overlap == 0.0) return 0.0;
    double precision = overlap / static_cast<double>(c.size());
    double recall = overlap / static_cast<double>(r.size());
    return 2.0 * precision * recall / (precision + recall);
}

SafetySecurityAgent::SafetySecurityAgent(std::shared_ptr<const ToolRegistry> registry,
                                         std::shared_ptr<const std::vector<DocumentChunk>> store, SsaConfig cfg,
                                         std::shared_ptr<const ChatClient> remote)
    : registry_(std::move(registry)), store_(std::move(store)), cfg_(cfg), remote_(std::move(remote)) {
    require(registry_ != nullptr, ErrorCode::InvalidArgument, "agent needs a tool registry");
    require(store_ != nullptr && !store_->empty(), ErrorCode::EmptyStore, "agent needs a document store");
}

AssistantResponse SafetySecurityAgent::handle(const intent::IntentResult& intent, const Payload& payload,
                                              const std::string& query, Audience audience) const {
    auto out = route_and_invoke(*registry_, intent, payload);
    // The verdict and top features steer retrieval alongside the user's words.
    std::string q = query + " " + out.findings.tool();
    if (out.findings.attack) q += " " + ids::to_string(out.findings.attack->label) + " attack";
    if (out.findings.battery) q += out.findings.battery->soh_label ? " battery degradation anomaly" : " battery health";
    for (const auto& b : attribution::waterfall_data(out.attribution, cfg_.prompt.top_k).bars) q += " " + b.feature;
    auto chunks = retrieve_context(q, *store_, cfg_.retrieve_k, cfg_.bm25);
    auto prompt = build_prompt(out.findings, out.attribution, chunks, audience, cfg_.prompt);
    return compose_explanation(prompt, remote_.get());
}

}  // namespace ioev::ssa
