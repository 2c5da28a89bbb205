#include "ioev/ids/flows.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::ids {

namespace {

std::optional<double> parse_number(const std::string& cell) {
    std::string s = trim(cell);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(AttackClass c) {
    switch (c) {
        case AttackClass::benign: return "benign";
        case AttackClass::recon: return "recon";
        case AttackClass::dos: return "dos";
    }
    return "?";
}

AttackClass parse_attack_label(const std::string& label) {
    std::string l = to_lower(trim(label));
    if (l == "0" || contains(l, "benign") || l == "normal") return AttackClass::benign;
    if (l == "1" || contains(l, "recon") || contains(l, "scan")) return AttackClass::recon;
    if (l == "2" || contains(l, "dos") || contains(l, "flood")) return AttackClass::dos;
    fail(ErrorCode::ParseError, "unrecognised attack label '" + label + "'");
}

FlowRecord FeatureTable::record(size_t i) const {
    FlowRecord r;
    r.names = columns;
    r.values = rows.at(i);
    if (i < labels.size()) r.label = static_cast<AttackClass>(labels[i]);
    return r;
}

CsvTable FeatureTable::to_csv(const std::string& label_column) const {
    CsvTable t;
    t.header = columns;
    bool labelled = labels.size() == rows.size() && !rows.empty();
    if (labelled) t.header.push_back(label_column);
    for (size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> cells;
        for (double v : rows[i]) cells.push_back(format_number(v));
        if (labelled) cells.push_back(std::to_string(labels[i]));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::string to_string(ScalerKind s) {
    switch (s) {
        case ScalerKind::zscore: return "zscore";
        case ScalerKind::minmax: return "minmax";
        case ScalerKind::none: return "none";
    }
    return "?";
}

ScalerKind parse_scaler(const std::string& s) {
    if (s == "zscore") return ScalerKind::zscore;
    if (s == "minmax") return ScalerKind::minmax;
    if (s == "none") return ScalerKind::none;
    fail(ErrorCode::InvalidArgument, "unknown scaler '" + s + "'");
}

const std::vector<std::string>& default_blocklist() {
    // Absolute timestamps, hardware and network addresses, flow identifiers.
    // Durations such as bidirectional_duration_ms are deliberately kept.
    static const std::vector<std::string> patterns = {
        "*timestamp*", "time", "date*", "*first_seen*", "*last_seen*", "*mac", "*_mac_*", "mac_*",
        "*_ip", "ip", "ip_*", "*_ip_*", "*_oui", "id", "flow_id", "expiration_id"};
    return patterns;
}

void PreprocessConfig::validate() const {
    require(corr_threshold > 0.0 && corr_threshold <= 1.0, ErrorCode::InvalidArgument,
            "corr_threshold must be in (0, 1]");
}

bool glob_match(const std::string& pattern, const std::string& text) {
    const std::string p = to_lower(pattern), t = to_lower(text);
    size_t pi = 0, ti = 0, star = std::string::npos, mark = 0;
    while (ti < t.size()) {
        if (pi < p.size() && (p[pi] == '?' || p[pi] == t[ti])) {
            ++pi;
            ++ti;
        } else if (pi < p.size() && p[pi] == '*') {
            star = pi++;
            mark = ti;
        } else if (star != std::string::npos) {
            pi = star + 1;
            ti = ++mark;
        } else {
            return false;
        }
    }
    while (pi < p.size() && p[pi] == '*') ++pi;
    return pi == p.size();
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && !a.empty(), ErrorCode::LengthMismatch, "pearson needs equal non-empty vectors");
    const double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::string FittedPreprocessor::fingerprint() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& c : columns) {
        for (unsigned char ch : c + "\n") {
            h ^= ch;
            h *= 1099511628211ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::vector<int> read_labels(const CsvTable& raw, const std::string& label_column) {
    std::vector<int> labels;
    if (auto lc = raw.column(label_column)) {
        labels.reserve(raw.rows.size());
        for (const auto& row : raw.rows) labels.push_back(static_cast<int>(parse_attack_label(row.at(*lc))));
    }
    return labels;
}

}  // namespace

FeatureTable FittedPreprocessor::apply(const CsvTable& raw) const {
    FeatureTable out;
    out.columns = columns;
    std::vector<size_t> idx;
    for (const auto& c : columns) {
        auto i = raw.column(c);
        require(i.has_value(), ErrorCode::SchemaMismatch, "column '" + c + "' missing from input");
        idx.push_back(*i);
    }
    out.rows.reserve(raw.rows.size());
    for (size_t r = 0; r < raw.rows.size(); ++r) {
        std::vector<double> row;
        row.reserve(idx.size());
        for (size_t k = 0; k < idx.size(); ++k) {
            auto v = parse_number(raw.rows[r].at(idx[k]));
            require(v.has_value(), ErrorCode::SchemaMismatch,
                    "column '" + columns[k] + "' row " + std::to_string(r) + " is not a finite number");
            row.push_back(*v);
        }
        out.rows.push_back(std::move(row));
    }
    out.labels = read_labels(raw, label_column);
    return out;
}

nlohmann::json FittedPreprocessor::to_json() const {
    return {{"columns", columns}, {"scaler", to_string(scaler)}, {"label_column", label_column},
            {"fingerprint", fingerprint()}};
}

FittedPreprocessor FittedPreprocessor::from_json(const nlohmann::json& j) {
    FittedPreprocessor p;
    p.columns = j.at("columns").get<std::vector<std::string>>();
    p.scaler = parse_scaler(j.value("scaler", "zscore"));
    p.label_column = j.value("label_column", "label");
    return p;
}

PreparedFlows preprocess_flows(const CsvTable& raw, const PreprocessConfig& cfg) {
    cfg.validate();
    require(!raw.rows.empty(), ErrorCode::InvalidArgument, "flow table has no rows");
    PreparedFlows out;

    std::vector<size_t> candidates;
    std::vector<std::vector<double>> values;
    for (size_t c = 0; c < raw.header.size(); ++c) {
        const std::string& name = raw.header[c];
        if (name == cfg.label_column) continue;
        bool blocked = std::any_of(cfg.blocklist_patterns.begin(), cfg.blocklist_patterns.end(),
                                   [&](const std::string& p) { return glob_match(p, name); });
        if (blocked) {
            out.dropped.push_back({name, "blocklist"});
            continue;
        }
        std::vector<double> col;
        col.reserve(raw.rows.size());
        bool numeric = true;
        for (const auto& row : raw.rows) {
            auto v = c < row.size() ? parse_number(row[c]) : std::nullopt;
            if (!v) {
                numeric = false;
                break;
            }
            col.push_back(*v);
        }
        if (!numeric) {
            out.dropped.push_back({name, "non_numeric"});
            continue;
        }
        if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); })) {
            out.dropped.push_back({name, "constant"});
            continue;
        }
        candidates.push_back(c);
        values.push_back(std::move(col));
    }

    std::vector<bool> keep(candidates.size(), true);
    for (size_t j = 0; j < candidates.size(); ++j) {
        for (size_t i = 0; i < j; ++i) {
            if (std::abs(pearson(values[i], values[j])) >= cfg.corr_threshold) {
                keep[j] = false;
                out.dropped.push_back({raw.header[candidates[j]], "correlated:" + raw.header[candidates[i]]});
                break;
            }
        }
    }

    FeatureTable& t = out.table;
    std::vector<size_t> kept;
    for (size_t j = 0; j < candidates.size(); ++j)
        if (keep[j]) {
            kept.push_back(j);
            t.columns.push_back(raw.header[candidates[j]]);
        }
    require(!kept.empty(), ErrorCode::AllColumnsDropped, "preprocessing dropped every feature column");
    t.rows.assign(raw.rows.size(), std::vector<double>(kept.size()));
    for (size_t r = 0; r < raw.rows.size(); ++r)
        for (size_t k = 0; k < kept.size(); ++k) t.rows[r][k] = values[kept[k]][r];
    t.labels = read_labels(raw, cfg.label_column);

    out.preprocessor.columns = t.columns;
    out.preprocessor.scaler = cfg.scaler;
    out.preprocessor.label_column = cfg.label_column;
    return out;
}

CsvTable apply_column_mapping(const CsvTable& raw, const nlohmann::json& mapping) {
    require(mapping.is_object(), ErrorCode::InvalidArgument, "column mapping must be a JSON object");
    CsvTable out = raw;
    for (auto& h : out.header)
        if (mapping.contains(h)) h = mapping.at(h).get<std::string>();
    return out;
}

std::pair<FeatureTable, FeatureTable> split_table(const FeatureTable& t, double test_fraction, uint64_t seed) {
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::InvalidArgument, "test_fraction must be in (0, 1)");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<size_t>> by_class(kNumClasses);
    bool labelled = t.labels.size() == t.rows.size();
    for (size_t i = 0; i < t.rows.size(); ++i) by_class[labelled ? t.labels[i] : 0].push_back(i);
    FeatureTable train, test;
    train.columns = test.columns = t.columns;
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t n_test = static_cast<size_t>(std::llround(test_fraction * idx.size()));
        for (size_t k = 0; k < idx.size(); ++k) {
            FeatureTable& dst = k < n_test ? test : train;
            dst.rows.push_back(t.rows[idx[k]]);
            if (labelled) dst.labels.push_back(t.labels[idx[k]]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace ioev::ids
