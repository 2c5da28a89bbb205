#include <iostream>

#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/core/text.hpp"
#include "ioev/eval/bench.hpp"

using namespace ioev;

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness: metrics, model size and latency per model and dataset"};
    app.require_subcommand(1);

    eval::BenchOptions opts;
    std::string suite = "battery", out;

    auto* run = app.add_subcommand("run", "Run one suite and write a JSON or Markdown report");
    run->add_option("--suite", suite, "battery|ids|forecast|intent|solver");
    run->add_option("--seed", opts.seed, "Seed for data, splits and training");
    run->add_option("--dataset", opts.dataset_path, "Real dataset for the suite's reference rows");
    run->add_flag("--quick", opts.quick, "Smaller synthetic sets and models");
    run->add_option("--out", out, "Report path; .md writes Markdown, anything else JSON. stdout when omitted");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        opts.suite = eval::parse_suite(suite);
        auto rep = eval::run_benchmark(opts);
        bool md = out.size() >= 3 && out.compare(out.size() - 3, 3, ".md") == 0;
        std::string text = md ? rep.to_markdown() : rep.to_json().dump(2) + "\n";
        if (out.empty())
            std::cout << text;
        else
            write_file(out, text);
        for (const auto& r : rep.rows)
            if (r.skipped) std::cerr << "skipped " << r.model << " on " << r.dataset << ": " << r.notice << '\n';
    });
}
