#include "ioev/ids/synth.hpp"

#include <cstdio>
#include <map>
#include <random>

#include "ioev/core/error.hpp"

namespace ioev::ids {

namespace {

struct Moments {
    double mean, sd;
};

struct FeatureSpec {
    const char* name;
    std::array<Moments, kNumClasses> by_class;  // benign, recon, dos
};

const std::vector<FeatureSpec>& gaussian_features() {
    static const std::vector<FeatureSpec> specs = {
        {"bidirectional_duration_ms", {{{4000, 1500}, {500, 300}, {9000, 2000}}}},
        {"bidirectional_packets", {{{40, 12}, {4, 2}, {300, 60}}}},
        {"bidirectional_bytes", {{{30000, 9000}, {300, 120}, {25000, 6000}}}},
        {"bidirectional_mean_ps", {{{700, 150}, {70, 15}, {90, 25}}}},
        {"bidirectional_mean_piat_ms", {{{100, 30}, {150, 60}, {30, 10}}}},
        {"bidirectional_stddev_piat_ms", {{{60, 20}, {90, 40}, {15, 8}}}},
        {"bidirectional_syn_packets", {{{1, 0.3}, {1, 0.3}, {20, 6}}}},
        {"bidirectional_rst_packets", {{{0.2, 0.3}, {1, 0.4}, {0.5, 0.4}}}},
    };
    return specs;
}

constexpr double kSrcShare = 0.55;

const char* label_text(int c) {
    static const char* names[] = {"Benign", "Recon-PortScan", "DoS-SYN-Flood"};
    return names[c];
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string hex_byte(uint64_t v) {
    char buf[4];
    std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>(v & 0xff));
    return buf;
}

}  // namespace

CsvTable synth_flows(const FlowSynthOptions& opts) {
    require(opts.n > 0, ErrorCode::InvalidArgument, "flow count must be positive");
    std::mt19937_64 rng(opts.seed);
    std::discrete_distribution<int> cls(opts.class_mix.begin(), opts.class_mix.end());
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> octet(1, 254);
    std::uniform_real_distribution<double> gap(0.0, 50.0);

    CsvTable t;
    t.header = {"id", "src_ip", "dst_ip", "src_mac", "bidirectional_first_seen_ms", "bidirectional_last_seen_ms",
                "protocol", "application_name"};
    for (const auto& f : gaussian_features()) t.header.push_back(f.name);
    t.header.insert(t.header.end(), {"src2dst_packets", "dst2src_packets", "label"});

    double clock = 1.7e12;
    for (size_t i = 0; i < opts.n; ++i) {
        int c = cls(rng);
        std::vector<double> g;
        for (const auto& f : gaussian_features()) g.push_back(f.by_class[c].mean + f.by_class[c].sd * z(rng));
        double src = kSrcShare * g[1] + 0.3 * z(rng);
        clock += gap(rng);
        std::vector<std::string> row = {
            std::to_string(i),
            "10.0." + std::to_string(octet(rng)) + "." + std::to_string(octet(rng)),
            "192.168.1." + std::to_string(octet(rng)),
            "02:00:00:" + hex_byte(rng()) + ":" + hex_byte(rng()) + ":" + hex_byte(rng()),
            num(clock),
            num(clock + g[0]),
            "6",
            c == 0 ? "TLS" : "Unknown"};
        for (double v : g) row.push_back(num(v));
        row.push_back(num(src));
        row.push_back(num(g[1] - src));
        row.push_back(label_text(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

FlowRecord cluster_center(AttackClass c, const std::vector<std::string>& names) {
    const int k = static_cast<int>(c);
    std::map<std::string, double> means;
    for (const auto& f : gaussian_features()) means[f.name] = f.by_class[k].mean;
    means["src2dst_packets"] = kSrcShare * means["bidirectional_packets"];
    means["dst2src_packets"] = (1.0 - kSrcShare) * means["bidirectional_packets"];
    FlowRecord r;
    r.names = names;
    r.label = c;
    for (const auto& n : names) {
        auto it = means.find(n);
        require(it != means.end(), ErrorCode::InvalidArgument, "generator has no feature '" + n + "'");
        r.values.push_back(it->second);
    }
    return r;
}

}  // namespace ioev::ids
