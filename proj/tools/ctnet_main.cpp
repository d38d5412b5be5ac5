// Command-line harness for training, sweeps, gradient checks and basis
// conditioning reports.

#include "ctnet/ctnet.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct SpecFlags {
    std::string config_path;
    std::string arch, basis, data, out_dir;
    int degree = 0, channels = 0, steps = 0, epochs = 0, batch_size = 0;
    double horizon = 0, alpha = 0, lr = 0, rtol = 0, atol = 0, loss_tolerance = 0;
    std::uint64_t seed = 0, data_seed = 0, split_seed = 0;
    std::vector<double> split;
    bool no_shuffle = false;
};

// Shared model/training flags. Values given on the command line override the
// config file, which overrides the defaults.
void add_spec_options(CLI::App* app, SpecFlags& f) {
    app->add_option("--config", f.config_path, "JSON file holding a full run spec");
    app->add_option("--arch", f.arch, "resnet | hamiltonian | node");
    app->add_option("--basis", f.basis, "legendre | monomial | none");
    app->add_option("--degree", f.degree, "polynomial degree (degree+1 basis functions)");
    app->add_option("--channels", f.channels, "hidden state width");
    app->add_option("--steps", f.steps, "time steps of the discrete architectures");
    app->add_option("--horizon", f.horizon, "final time T");
    app->add_option("--alpha", f.alpha, "Tikhonov regularization coefficient");
    app->add_option("--epochs", f.epochs, "training epochs");
    app->add_option("--batch-size", f.batch_size, "mini-batch size");
    app->add_option("--lr", f.lr, "ADAM learning rate");
    app->add_option("--seed", f.seed, "initialization and shuffle seed");
    app->add_option("--loss-tolerance", f.loss_tolerance, "early-stop threshold on train loss");
    app->add_flag("--no-shuffle", f.no_shuffle, "disable epoch shuffling");
    app->add_option("--rtol", f.rtol, "ODE solver relative tolerance");
    app->add_option("--atol", f.atol, "ODE solver absolute tolerance");
    app->add_option("--data", f.data,
                    "synth:smooth:NF:M:NS | synth:ode:NF:M:NS | csv:FEAT:TARG:rows|cols");
    app->add_option("--data-seed", f.data_seed, "synthetic generator seed");
    app->add_option("--split", f.split, "train/val/test fractions")->expected(3);
    app->add_option("--split-seed", f.split_seed, "split permutation seed");
    app->add_option("--out", f.out_dir, "output directory (default $CTNET_OUT_ROOT/run)");
}

ctnet::RunSpec resolve_spec(const CLI::App* app, const SpecFlags& f) {
    ctnet::RunSpec spec;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw std::runtime_error("cannot open config file " + f.config_path);
        nlohmann::json j;
        in >> j;
        spec = ctnet::RunSpec::from_json(j);
    }
    auto given = [&](const std::string& name) { return app->count(name) > 0; };
    if (given("--arch")) spec.arch = f.arch;
    if (given("--basis")) spec.basis = f.basis;
    if (given("--degree")) spec.degree = f.degree;
    if (given("--channels")) spec.channels = f.channels;
    if (given("--steps")) spec.steps = f.steps;
    if (given("--horizon")) spec.horizon = f.horizon;
    if (given("--alpha")) spec.alpha = f.alpha;
    if (given("--epochs")) spec.epochs = f.epochs;
    if (given("--batch-size")) spec.batch_size = f.batch_size;
    if (given("--lr")) spec.lr = f.lr;
    if (given("--seed")) spec.seed = f.seed;
    if (given("--loss-tolerance")) spec.loss_tolerance = f.loss_tolerance;
    if (given("--no-shuffle")) spec.shuffle = false;
    if (given("--rtol")) spec.rtol = f.rtol;
    if (given("--atol")) spec.atol = f.atol;
    if (given("--data")) spec.data = f.data;
    if (given("--data-seed")) spec.data_seed = f.data_seed;
    if (given("--split")) spec.split_fractions = f.split;
    if (given("--split-seed")) spec.split_seed = f.split_seed;
    if (given("--out")) spec.out_dir = f.out_dir;
    return spec;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-time network training with polynomial weight parameterization"};
    app.require_subcommand(1);

    SpecFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train one model and write run artifacts");
    add_spec_options(train_cmd, train_flags);

    SpecFlags sweep_flags;
    std::string sweep_axis;
    std::string sweep_values;
    bool vary_steps = false;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run one configuration per axis value");
    add_spec_options(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--axis", sweep_axis, "degree | basis | arch | depth")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep_cmd->add_flag("--vary-steps", vary_steps,
                        "depth axis: keep dt fixed and scale the step count with T");

    SpecFlags check_flags;
    double check_tol = 1e-6;
    std::string corrupt_block;
    CLI::App* check_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
    add_spec_options(check_cmd, check_flags);
    check_cmd->add_option("--tolerance", check_tol, "max relative error allowed per block");
    check_cmd->add_option("--corrupt-block", corrupt_block,
                          "negate one analytic block (fault-injection hook)")
        ->group("");

    int cond_from = 0, cond_to = 10, cond_points = 50;
    std::string cond_kinds = "monomial,legendre";
    std::string cond_output;
    CLI::App* cond_cmd = app.add_subcommand("condition", "basis-matrix conditioning report as CSV");
    cond_cmd->add_option("--degree-from", cond_from, "first degree");
    cond_cmd->add_option("--degree-to", cond_to, "last degree");
    cond_cmd->add_option("--points", cond_points, "equispaced grid points on [0,1]");
    cond_cmd->add_option("--kinds", cond_kinds, "comma-separated basis kinds");
    cond_cmd->add_option("--output", cond_output, "CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            const ctnet::RunSpec spec = resolve_spec(train_cmd, train_flags);
            return ctnet::cmd_train(spec).exit_code;
        }
        if (sweep_cmd->parsed()) {
            const ctnet::RunSpec spec = resolve_spec(sweep_cmd, sweep_flags);
            return ctnet::cmd_sweep(spec, ctnet::parse_axis(sweep_axis), split_commas(sweep_values),
                                    vary_steps);
        }
        if (check_cmd->parsed()) {
            const ctnet::RunSpec spec = resolve_spec(check_cmd, check_flags);
            return ctnet::cmd_gradcheck(spec, check_tol, corrupt_block);
        }
        if (cond_cmd->parsed()) {
            std::vector<ctnet::BasisFamily> families;
            for (const std::string& k : split_commas(cond_kinds)) {
                if (k == "monomial")
                    families.push_back(ctnet::BasisFamily::Monomial);
                else if (k == "legendre")
                    families.push_back(ctnet::BasisFamily::Legendre);
                else
                    throw std::invalid_argument("condition: unknown kind '" + k + "'");
            }
            return ctnet::cmd_condition(families, cond_from, cond_to, cond_points, cond_output);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
