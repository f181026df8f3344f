#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cape/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<double> lambda_s;
    std::optional<double> tau;
    std::optional<double> rho0;
    std::optional<std::size_t> low_rank;
};

cape::PipelineConfig resolve_config(const GlobalArgs& args) {
    cape::PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = cape::load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.lambda_s) cfg.discovery.lambda_s = *args.lambda_s;
    if (args.tau) cfg.discovery.tau = *args.tau;
    if (args.rho0) cfg.discovery.rho0 = *args.rho0;
    if (args.low_rank) cfg.discovery.low_rank = *args.low_rank;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal-positional-encoding pipeline"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "JSON config file");
    app.add_option("--seed", args.seed, "global seed (overrides config)");
    app.add_option("--out", args.out_dir, "artifact directory");
    app.add_option("--lambda-s", args.lambda_s, "sparsity weight override");
    app.add_option("--tau", args.tau, "pruning threshold override");
    app.add_option("--rho0", args.rho0, "initial penalty override");
    app.add_option("--low-rank", args.low_rank, "adjacency factorization rank (0 = full)");

    auto* c_synth = app.add_subcommand("synth", "generate ground-truth DAG and data");
    auto* c_discover = app.add_subcommand("discover", "fit the causal structure");
    auto* c_embed = app.add_subcommand("embed", "hyperbolic node embedding");
    auto* c_encode = app.add_subcommand("encode", "emit rotary angles");
    auto* c_attend = app.add_subcommand("attend", "run the attention layer over observations");
    auto* c_validate = app.add_subcommand("validate", "run the property bench");
    auto* c_pipeline = app.add_subcommand("pipeline", "all stages in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const cape::PipelineConfig cfg = resolve_config(args);
        if (c_synth->parsed()) {
            cape::run_synth(cfg, args.out_dir);
        } else if (c_discover->parsed()) {
            cape::run_discover(cfg, args.out_dir);
        } else if (c_embed->parsed()) {
            cape::run_embed(cfg, args.out_dir);
        } else if (c_encode->parsed()) {
            cape::run_encode(cfg, args.out_dir);
        } else if (c_attend->parsed()) {
            cape::run_attend(cfg, args.out_dir);
        } else if (c_validate->parsed()) {
            if (!cape::run_validate(cfg, args.out_dir)) {
                std::cerr << "validate: one or more property checks failed\n";
                return 2;
            }
        } else if (c_pipeline->parsed()) {
            if (!cape::run_pipeline(cfg, args.out_dir)) {
                std::cerr << "pipeline: property bench reported failures\n";
                return 2;
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        if (what.find("cycle") != std::string::npos || what.find("config") != std::string::npos)
            return 3;
        return 2;
    }
    return 0;
}
