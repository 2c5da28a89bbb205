#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/core/text.hpp"
#include "ioev/eval/metrics.hpp"
#include "ioev/intent/intent.hpp"

using namespace ioev;

int main(int argc, char** argv) {
    CLI::App app{"Intent gate: train and run the baseline classifier"};
    app.require_subcommand(1);

    std::string corpus, model_path = "intent-model.json", text, source = "driver";
    uint64_t seed = 0;
    size_t test_per_class = 5;

    auto* train = app.add_subcommand("train", "Train on a JSON-lines corpus and save the model");
    train->add_option("--corpus", corpus, "Corpus path")->required();
    train->add_option("--seed", seed, "Training seed");
    train->add_option("--out", model_path, "Model output path");

    auto* classify = app.add_subcommand("classify", "Classify one query");
    classify->add_option("--text", text, "Query text")->required();
    classify->add_option("--model", model_path, "Model from 'train'");
    classify->add_option("--corpus", corpus, "Train on this corpus instead of loading a model");
    classify->add_option("--seed", seed, "Training seed when --corpus is given");
    classify->add_option("--source", source, "driver|operator|system-event");

    auto* eval = app.add_subcommand("eval", "Held-out accuracy on a stratified split");
    eval->add_option("--corpus", corpus, "Corpus path")->required();
    eval->add_option("--seed", seed, "Split and training seed");
    eval->add_option("--test-per-class", test_per_class, "Held-out queries per label");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        if (*train) {
            auto m = intent::BaselineModel::train(intent::load_corpus(corpus), seed);
            write_file(model_path, m.to_json().dump());
            std::cout << "saved " << model_path << '\n';
        } else if (*classify) {
            auto m = corpus.empty() ? intent::BaselineModel::from_json(nlohmann::json::parse(read_file(model_path)))
                                    : intent::BaselineModel::train(intent::load_corpus(corpus), seed);
            auto r = m.classify(intent::QueryText(text, intent::parse_source(source)));
            std::cout << nlohmann::json{{"label", static_cast<int>(r.label)},
                                        {"name", intent::to_string(r.label)},
                                        {"confidence", r.confidence}}
                             .dump()
                      << '\n';
        } else {
            auto [tr, te] = intent::split_corpus(intent::load_corpus(corpus), test_per_class, seed);
            auto m = intent::BaselineModel::train(tr, seed);
            auto cc = intent::evaluate_intents(m, te);
            auto metrics = eval::classification_metrics(cc, std::nullopt);
            std::cout << nlohmann::json{{"train", tr.size()},
                                        {"test", te.size()},
                                        {"accuracy", metrics.accuracy},
                                        {"macro_f1", metrics.f1},
                                        {"confusion", cc.to_json()}}
                             .dump(2)
                      << '\n';
        }
    });
}
