#include <algorithm>
#include <cstdio>
#include <regex>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"
#include "ioev/support/aos.hpp"

namespace ioev::support {

namespace {

bool has(const std::string& text, const std::string& phrase) { return text.find(phrase) != std::string::npos; }

bool has_any(const std::string& text, std::initializer_list<const char*> phrases) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const char* p) { return has(text, p); });
}

std::string normalize(const std::string& text) {
    std::string t = to_lower(text);
    // typographic apostrophe
    for (size_t pos; (pos = t.find("\xe2\x80\x99")) != std::string::npos;) t.replace(pos, 3, "'");
    return t;
}

std::string clock(int h, int m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d", h, m);
    return buf;
}

// "7am", "6:30am", "23:00", "noon", "midnight" at the start of s.
std::optional<std::string> parse_clock_prefix(const std::string& s) {
    static const std::regex ampm(R"(^(\d{1,2})(?::(\d{2}))?\s*(am|pm)\b)");
    static const std::regex h24(R"(^(\d{1,2}):(\d{2})\b)");
    std::smatch m;
    if (std::regex_search(s, m, ampm)) {
        int h = std::stoi(m[1]), mm = m[2].matched ? std::stoi(m[2]) : 0;
        if (h < 1 || h > 12 || mm > 59) return std::nullopt;
        if (m[3] == "pm" && h < 12) h += 12;
        if (m[3] == "am" && h == 12) h = 0;
        return clock(h, mm);
    }
    if (std::regex_search(s, m, h24)) {
        int h = std::stoi(m[1]), mm = std::stoi(m[2]);
        if (h > 23 || mm > 59) return std::nullopt;
        return clock(h, mm);
    }
    if (starts_with(s, "noon")) return clock(12, 0);
    if (starts_with(s, "midnight")) return clock(0, 0);
    return std::nullopt;
}

// "by 7am", "before noon", "until 5pm" -> HH:MM; else tomorrow / tonight.
std::optional<std::string> extract_deadline(const std::string& t) {
    static const std::regex bound(R"(\b(?:by|before|until|no later than)\s+)");
    for (auto it = std::sregex_iterator(t.begin(), t.end(), bound); it != std::sregex_iterator(); ++it) {
        auto rest = t.substr(static_cast<size_t>(it->position() + it->length()));
        if (auto c = parse_clock_prefix(rest)) return c;
    }
    if (has(t, "tomorrow")) return "tomorrow";
    if (has(t, "tonight")) return "tonight";
    return std::nullopt;
}

std::optional<std::string> extract_location(const std::string& t) {
    if (has_any(t, {"way back home", "way home", "heading home", "drive home", "back home", "get home", "going home"}))
        return "homeward";
    if (has_any(t, {"at home", "home charger"})) return "home";
    if (has_any(t, {"at work", "at the office", "work charger"})) return "work";
    return std::nullopt;
}

struct Hit {
    size_t pos;
    size_t len;
    std::string value;
};

// Earliest match of any phrase; longer phrases win at equal positions.
std::vector<Hit> find_all(const std::string& t, const std::vector<std::pair<std::string, std::string>>& phrases) {
    std::vector<Hit> hits;
    for (const auto& [phrase, value] : phrases) {
        std::regex re("\\b" + phrase + "\\b");
        for (auto it = std::sregex_iterator(t.begin(), t.end(), re); it != std::sregex_iterator(); ++it)
            hits.push_back({static_cast<size_t>(it->position()), static_cast<size_t>(it->length()), value});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.pos != b.pos ? a.pos < b.pos : a.len > b.len;
    });
    return hits;
}

std::optional<std::string> first_time_phrase(const std::string& seg) {
    static const std::vector<std::pair<std::string, std::string>> phrases = {
        {"late-night", "late-night"},         {"late night", "late-night"},
        {"tonight", "tonight"},               {"this evening", "this evening"},
        {"this afternoon", "this afternoon"}, {"tomorrow morning", "tomorrow morning"},
        {"tomorrow", "tomorrow"}};
    std::optional<Hit> best;
    if (auto hits = find_all(seg, phrases); !hits.empty()) best = hits.front();
    static const std::regex at(R"(\bat\s+)");
    for (auto it = std::sregex_iterator(seg.begin(), seg.end(), at); it != std::sregex_iterator(); ++it) {
        size_t pos = static_cast<size_t>(it->position());
        if (best && best->pos < pos) break;
        if (auto c = parse_clock_prefix(seg.substr(pos + static_cast<size_t>(it->length())))) {
            best = Hit{pos, 0, *c};
            break;
        }
    }
    if (best) return best->value;
    return std::nullopt;
}

nlohmann::json extract_milestones(const std::string& t) {
    static const std::vector<std::pair<std::string, std::string>> activities = {
        {"event", "event"},     {"party", "party"},   {"concert", "concert"},         {"dinner", "dinner"},
        {"game", "game"},       {"movie", "movie"},   {"cinema", "movie"},            {"meeting", "meeting"},
        {"airport", "airport"}, {"flight", "flight"}, {"commute", "commute"},         {"work", "commute"},
        {"school", "school"},   {"gym", "gym"},       {"appointment", "appointment"}, {"trip", "trip"}};
    auto raw = find_all(t, activities);
    std::vector<Hit> hits;
    for (const auto& h : raw) {
        bool dup = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) { return o.value == h.value; });
        if (!dup) hits.push_back(h);
    }
    nlohmann::json out = nlohmann::json::array();
    if (hits.empty()) {
        if (auto when = first_time_phrase(t)) out.push_back({{"label", "trip"}, {"when", *when}});
        return out;
    }
    for (size_t i = 0; i < hits.size(); ++i) {
        size_t start = hits[i].pos + hits[i].len;
        size_t end = i + 1 < hits.size() ? hits[i + 1].pos : t.size();
        size_t prev = i > 0 ? hits[i - 1].pos + hits[i - 1].len : 0;
        auto when = first_time_phrase(t.substr(start, end - start));
        if (!when) when = first_time_phrase(t.substr(prev, hits[i].pos - prev));
        out.push_back({{"label", hits[i].value}, {"when", when.value_or("unspecified")}});
    }
    return out;
}

std::optional<std::pair<double, double>> extract_weights(const std::string& t) {
    static const std::regex pct(
        R"((\d{1,3})\s*%\s*(?:weight\s+)?(?:on|for|towards)?\s*(?:the\s+)?(cost|price|money|savings?|battery|wear|health))");
    std::smatch m;
    if (std::regex_search(t, m, pct)) {
        int n = std::stoi(m[1]);
        if (n <= 100) {
            std::string what = m[2];
            bool on_cost = what == "cost" || what == "price" || what == "money" || starts_with(what, "saving");
            double a = n / 100.0, b = (100 - n) / 100.0;
            return on_cost ? std::make_pair(a, b) : std::make_pair(b, a);
        }
    }
    if (has_any(t, {"mostly care about cost", "mostly care about price", "mostly about cost", "prioritize cost",
                    "prioritise cost", "prioritize price", "prioritise price", "cost first", "price first",
                    "mainly about cost", "battery matters less", "cost matters more", "price matters more"}))
        return std::make_pair(0.75, 0.25);
    if (has_any(t, {"prioritize battery", "prioritise battery", "battery health first", "battery first",
                    "mostly care about the battery", "mostly care about battery", "mainly about the battery",
                    "cost matters less", "price matters less", "battery matters more"}))
        return std::make_pair(0.25, 0.75);
    bool cost_words = has_any(t, {"cheap", "cost", "price", "money", "saving", "budget"});
    if (cost_words || has_any(t, {"balance", "trade-off", "tradeoff", "trade off", "equally"}))
        return std::make_pair(0.5, 0.5);
    // only the battery side is mentioned
    return std::make_pair(0.25, 0.75);
}

std::optional<std::string> extract_criterion(const std::string& t) {
    static const std::vector<std::pair<std::string, std::string>> phrases = {
        {"cheapest", "cost"},        {"cheaper", "cost"},          {"cheap", "cost"},
        {"lowest price", "cost"},    {"least expensive", "cost"},  {"best price", "cost"},
        {"quickest", "time"},        {"fastest", "time"},          {"quickly", "time"},
        {"quick", "time"},           {"least busy", "time"},       {"shortest wait", "time"},
        {"without waiting", "time"}, {"nearest", "distance"},      {"closest", "distance"},
        {"shortest detour", "distance"}};
    auto hits = find_all(t, phrases);
    if (hits.empty()) return std::nullopt;
    return hits.front().value;
}

std::optional<ProblemType> classify(const std::string& t) {
    if (has_any(t, {"station", "charger", "charging point"}) &&
        has_any(t, {"which", "where", "find", "nearest", "closest", "best", "recommend", "choose", "pick", "suggest",
                    "nearby", "near me", "around here", "should i go", "least busy"}))
        return ProblemType::station_selection;
    if (has_any(t, {"battery health", "battery life", "battery wear", "wear", "degradation", "degrade", "gentle",
                    "protect the battery", "protect my battery", "easy on the battery", "kind to the battery",
                    "balance", "trade-off", "tradeoff", "trade off"}))
        return ProblemType::multi_objective_weighted;
    if (has_any(t, {"enough charge", "enough range", "enough battery", "enough energy", "sufficient charge",
                    "make sure", "will i have", "can i make it", "have enough", "in time for", "ready for",
                    "ready by", "make it to"}))
        return ProblemType::deadline_feasibility;
    if (has_any(t, {"cheap", "lowest cost", "least expensive", "save money", "minimize cost", "minimise cost",
                    "minimize the cost", "minimise the cost", "lowest price", "low price", "off-peak", "off peak",
                    "inexpensive", "cost", "budget", "saving", "lowest rate"}))
        return ProblemType::cost_min_charging;
    return std::nullopt;
}

void resolve(AbstractOptimizationSkeleton& a, const std::string& name, nlohmann::json value) {
    auto& s = a.slot(name);
    s.value = std::move(value);
    s.provenance = Provenance::request_text;
}

}  // namespace

AbstractOptimizationSkeleton extract_aos_baseline(const std::string& text) {
    auto t = normalize(text);
    auto type = classify(t);
    if (!type) fail(ErrorCode::NoCatalogMatch, "request does not match any supported optimization problem");
    auto a = skeleton_for(*type);
    // Unresolved type-1 slots fall back to documented defaults during grounding.
    for (auto& s : a.slots)
        if (s.category == SlotCategory::type1_explicit) s.provenance = Provenance::default_value;

    switch (*type) {
        case ProblemType::cost_min_charging:
            resolve(a, "objective", "minimize_cost");
            if (auto d = extract_deadline(t)) resolve(a, "deadline", *d);
            if (auto l = extract_location(t)) resolve(a, "location_context", *l);
            break;
        case ProblemType::deadline_feasibility: {
            auto ms = extract_milestones(t);
            if (!ms.empty()) resolve(a, "milestones", ms);
            break;
        }
        case ProblemType::multi_objective_weighted: {
            if (auto d = extract_deadline(t)) resolve(a, "deadline", *d);
            if (auto w = extract_weights(t)) {
                resolve(a, "cost_weight", w->first);
                resolve(a, "wear_weight", w->second);
            }
            break;
        }
        case ProblemType::station_selection:
            if (auto c = extract_criterion(t)) resolve(a, "selection_criterion", *c);
            break;
    }
    return a;
}

std::string llm_extraction_prompt(const std::string& text) {
    nlohmann::json cat = nlohmann::json::array();
    for (auto t : all_problem_types()) {
        const auto& e = catalog_entry(t);
        nlohmann::json slots = nlohmann::json::array();
        for (const auto& s : e.slots)
            slots.push_back({{"name", s.name}, {"category", to_string(s.category)}, {"source", to_string(s.source)}});
        cat.push_back({{"problem_type", to_string(t)},
                       {"objective", e.objective},
                       {"constraints", e.constraints},
                       {"slots", slots}});
    }
    return "Map the EV charging request to one problem type of the catalog and answer with a single JSON object "
           "using schema " +
           std::string(kAosSchemaVersion) +
           ": {problem_type, objective, variables:[{name,domain,units}], constraints:[...], "
           "slots:[{name, category, status, provenance, value?}]}. Fill type1_explicit slots only from the request "
           "text; leave type2_physical slots unresolved.\nCatalog: " +
           cat.dump() + "\nRequest: " + text;
}

Extraction extract_aos(const std::string& text, const PsaBackend& backend) {
    Extraction out;
    if (backend.kind == PsaBackend::Kind::llm) {
        try {
            if (!backend.complete) fail(ErrorCode::BackendUnavailable, "no completion function configured");
            auto reply = backend.complete("You convert requests into optimization skeletons.",
                                          llm_extraction_prompt(text));
            // tolerate a fenced code block around the JSON
            auto open = reply.find('{'), close = reply.rfind('}');
            if (open == std::string::npos || close == std::string::npos || close < open)
                fail(ErrorCode::SchemaViolation, "reply holds no JSON object");
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(reply.substr(open, close - open + 1));
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::SchemaViolation, std::string("reply is not valid JSON: ") + e.what());
            }
            out.aos = AbstractOptimizationSkeleton::from_json(j);
            validate_aos(out.aos);
            for (const auto& s : out.aos.slots)
                if (s.category == SlotCategory::type2_physical && s.resolved())
                    fail(ErrorCode::SchemaViolation, "type-2 slot '" + s.name + "' must be left unresolved");
            return out;
        } catch (const std::exception& e) {  // transports may throw their own types
            out.fallback = true;
            out.fallback_reason = e.what();
        }
    }
    out.aos = extract_aos_baseline(text);
    return out;
}

}  // namespace ioev::support
