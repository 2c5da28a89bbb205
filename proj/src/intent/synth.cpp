#include "ioev/intent/synth.hpp"

#include <random>

#include "ioev/core/error.hpp"

namespace ioev::intent {

namespace {

struct LabelGrammar {
    IntentLabel label;
    std::vector<const char*> templates;  // {a} and {b} are filled from the word lists
    std::vector<const char*> a;
    std::vector<const char*> b;
};

const std::vector<LabelGrammar>& grammar() {
    static const std::vector<LabelGrammar> g = {
        {IntentLabel::user_support,
         {"Charge my car {a} before {b}", "Plan the {a} charging schedule for {b}",
          "When should I charge {a} {b}?", "Find a {a} charging station for {b}",
          "I need enough charge for {b}, keep it {a}", "Schedule charging {b} as {a} as possible"},
         {"cheaply", "cheapest", "fastest", "greenest", "quickly", "cost-effectively"},
         {"8am", "tonight", "tomorrow morning", "my commute", "the weekend trip", "work"}},
        {IntentLabel::evcs_security,
         {"Is the charging station under a {a} {b}?", "Explain the {a} {b} alert at the charger",
          "Why did the station flag {a} {b}?", "Check the EVCS network for {a} {b}",
          "Operator report: suspicious {a} {b} on the charger", "Block the {a} {b} hitting the station"},
         {"DoS", "denial-of-service", "port scan", "reconnaissance", "SYN flood", "intrusion"},
         {"attack", "traffic", "packets", "flows", "activity", "probe"}},
        {IntentLabel::battery_diagnostics,
         {"Why is my battery {a} {b}?", "Check my battery {a} {b}", "Is the battery {a} a sign of {b}?",
          "Diagnose battery {a} during {b}", "My pack shows {a}, is that {b}?", "Explain the battery {a} {b}"},
         {"temperature", "voltage spread", "state of health", "cell voltage", "capacity fade", "degradation"},
         {"rising", "while charging", "degradation", "anomaly", "today", "getting worse"}},
    };
    return g;
}

std::string fill(std::string t, const std::string& a, const std::string& b) {
    if (auto i = t.find("{a}"); i != std::string::npos) t.replace(i, 3, a);
    if (auto i = t.find("{b}"); i != std::string::npos) t.replace(i, 3, b);
    return t;
}

}  // namespace

LabeledQueryCorpus synth_queries(const QuerySynthOptions& opts) {
    require(opts.n > 0, ErrorCode::InvalidArgument, "query count must be positive");
    std::mt19937_64 rng(opts.seed);
    LabeledQueryCorpus out;
    const auto& g = grammar();
    for (size_t i = 0; i < opts.n; ++i) {
        const auto& lg = g[i % g.size()];
        std::uniform_int_distribution<size_t> t(0, lg.templates.size() - 1), a(0, lg.a.size() - 1),
            b(0, lg.b.size() - 1);
        out.push_back({fill(lg.templates[t(rng)], lg.a[a(rng)], lg.b[b(rng)]), lg.label});
    }
    return out;
}

}  // namespace ioev::intent
