#include "saten/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"saten: tensor-train + sparse-residual weight compression"};
    app.require_subcommand(1);

    using namespace saten::cli;

    CompressArgs compress_args;
    auto* compress = app.add_subcommand("compress", "compress matched layers of a bundle");
    compress->add_option("--input", compress_args.input, "input bundle directory")->required();
    compress->add_option("--config", compress_args.config, "compression config (json)")->required();
    compress->add_option("--output", compress_args.output, "output bundle directory")->required();
    compress->add_option("--tokens", compress_args.tokens, "token stream for row sparsity");
    compress->add_option("--token-format", compress_args.token_format,
                         "token file format: text (default) or bin");
    compress->add_option("--report", compress_args.report, "write a json cost report here");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "check error bounds of a compressed bundle");
    verify->add_option("--original", verify_args.original, "bundle with the dense weights")->required();
    verify->add_option("--compressed", verify_args.compressed, "compressed bundle")->required();
    verify->add_option("--samples", verify_args.samples, "random forward probes per layer");

    FinetuneArgs finetune_args;
    auto* finetune = app.add_subcommand("finetune", "toy per-layer regression fine-tuning");
    finetune->add_option("--compressed", finetune_args.compressed, "compressed bundle")->required();
    finetune->add_option("--data", finetune_args.data,
                         "bundle of <layer>/x and <layer>/y sample matrices")->required();
    finetune->add_option("--lr", finetune_args.lr, "learning rate");
    finetune->add_option("--steps", finetune_args.steps, "sgd steps per layer");
    finetune->add_option("--output", finetune_args.output,
                         "output bundle (default: overwrite --compressed)");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic weight bundle");
    synth->add_option("--rows", synth_args.rows, "N")->required();
    synth->add_option("--cols", synth_args.cols, "M")->required();
    synth->add_option("--rank", synth_args.rank, "rank of the low-rank part");
    synth->add_option("--spikes", synth_args.spikes, "number of outlier entries");
    synth->add_option("--noise", synth_args.noise, "noise level eta");
    synth->add_option("--seed", synth_args.seed, "rng seed");
    synth->add_option("--name", synth_args.name, "tensor name (default W)");
    synth->add_option("--output", synth_args.output, "output bundle directory")->required();

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "print cost accounting for a compressed bundle");
    report->add_option("--compressed", report_args.compressed, "compressed bundle")->required();
    report->add_option("--format", report_args.format, "table (default) or json");

    CLI11_PARSE(app, argc, argv);

    return guard(std::cerr, [&]() -> int {
        if (compress->parsed()) return run_compress(compress_args, std::cout);
        if (verify->parsed()) return run_verify(verify_args, std::cout);
        if (finetune->parsed()) return run_finetune(finetune_args, std::cout);
        if (synth->parsed()) return run_synth(synth_args, std::cout);
        return run_report(report_args, std::cout);
    });
}
