#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/core/csv.hpp"
#include "ioev/core/text.hpp"
#include "ioev/ids/detector.hpp"
#include "ioev/ids/synth.hpp"

using namespace ioev;

namespace {

CsvTable load_flows(const std::string& path, const std::string& mapping) {
    auto raw = read_csv(path);
    if (!mapping.empty()) raw = ids::apply_column_mapping(raw, nlohmann::json::parse(read_file(mapping)));
    return raw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EVCS intrusion detection over flow-feature CSVs"};
    app.require_subcommand(1);

    std::string in, out, mapping, model_path = "ids-model.bin", arch = "gbdt";
    uint64_t seed = 1;
    size_t n = 3000;
    double test_fraction = 0.3;

    auto* synth = app.add_subcommand("synth", "Write a labelled synthetic flow CSV");
    synth->add_option("--n", n, "Flow count");
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", out, "CSV output path")->required();

    auto* prep = app.add_subcommand("preprocess", "Drop identifier, constant and correlated columns");
    prep->add_option("--in", in, "Raw flow CSV")->required();
    prep->add_option("--mapping", mapping, "JSON {source column: canonical name} applied first");
    prep->add_option("--out", out, "Feature CSV output path")->required();

    auto* train = app.add_subcommand("train", "Train a detector and report held-out metrics");
    train->add_option("--in", in, "Labelled raw flow CSV")->required();
    train->add_option("--mapping", mapping, "Column mapping JSON");
    train->add_option("--arch", arch, "mlp|lstm|gbdt");
    train->add_option("--seed", seed, "Split and training seed");
    train->add_option("--test-fraction", test_fraction, "Held-out fraction");
    train->add_option("--out", model_path, "Detector output path");

    auto* infer = app.add_subcommand("infer", "Classify every flow; one JSON line per row");
    infer->add_option("--model", model_path, "Detector path");
    infer->add_option("--in", in, "Flow CSV")->required();
    infer->add_option("--mapping", mapping, "Column mapping JSON");

    auto* eval = app.add_subcommand("eval", "Metrics of a saved detector on a labelled CSV");
    eval->add_option("--model", model_path, "Detector path");
    eval->add_option("--in", in, "Labelled flow CSV")->required();
    eval->add_option("--mapping", mapping, "Column mapping JSON");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        if (*synth) {
            write_file(out, format_csv(ids::synth_flows({n, seed, {0.6, 0.15, 0.25}})));
        } else if (*prep) {
            auto p = ids::preprocess_flows(load_flows(in, mapping));
            write_file(out, format_csv(p.table.to_csv()));
            std::cout << "kept " << p.table.columns.size() << " columns, dropped " << p.dropped.size() << '\n';
        } else if (*train) {
            auto p = ids::preprocess_flows(load_flows(in, mapping));
            auto [tr, te] = ids::split_table(p.table, test_fraction, seed);
            ids::DetectorConfig cfg;
            cfg.arch = ids::parse_detector_arch(arch);
            auto det = ids::train_detector(tr, p.preprocessor, cfg, seed);
            auto ev = ids::evaluate_detector(det, te);
            det.save(model_path);
            std::cout << nlohmann::json{{"model", model_path},
                                        {"fingerprint", det.fingerprint()},
                                        {"accuracy", ev.macro.accuracy},
                                        {"macro_f1", ev.macro.f1},
                                        {"confusion", ev.counts.to_json()}}
                             .dump(2)
                      << '\n';
        } else if (*infer) {
            auto det = ids::Detector::load(model_path);
            auto table = det.preprocessor().apply(load_flows(in, mapping));
            for (size_t i = 0; i < table.size(); ++i) {
                auto p = det.infer(table.record(i));
                std::cout << nlohmann::json{{"row", i},
                                            {"label", ids::to_string(p.label)},
                                            {"probabilities", p.probabilities}}
                                 .dump()
                          << '\n';
            }
        } else {
            auto det = ids::Detector::load(model_path);
            auto table = det.preprocessor().apply(load_flows(in, mapping));
            require(table.labels.size() == table.size(), ErrorCode::SchemaMismatch, "the CSV has no label column");
            auto ev = ids::evaluate_detector(det, table);
            std::cout << nlohmann::json{{"accuracy", ev.macro.accuracy},
                                        {"precision", ev.macro.precision},
                                        {"recall", ev.macro.recall},
                                        {"macro_f1", ev.macro.f1},
                                        {"confusion", ev.counts.to_json()}}
                             .dump(2)
                      << '\n';
        }
    });
}
