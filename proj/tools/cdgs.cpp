// Experiment runner: fit, synth and eval subcommands.

#include <cdgs/cli.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv)
{
    CLI::App app{"Cross-domain label propagation with discriminative graph self-learning"};
    app.require_subcommand(1);

    std::string fit_config;
    auto* fit = app.add_subcommand("fit", "run the alternating solver on a dataset");
    fit->add_option("--config", fit_config, "key = value config file")->required();

    std::string synth_config;
    auto* synth = app.add_subcommand("synth", "write a synthetic covariate-shift dataset");
    synth->add_option("--config", synth_config, "key = value config file")->required();

    std::string pred;
    std::string truth;
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", pred, "predictions CSV")->required();
    eval->add_option("--truth", truth, "truth CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cdgs::cli::exit_config;
    }

    if (*fit) return cdgs::cli::cmd_fit(fit_config, std::cout, std::cerr);
    if (*synth) return cdgs::cli::cmd_synth(synth_config, std::cout, std::cerr);
    return cdgs::cli::cmd_eval(pred, truth, std::cout, std::cerr);
}
