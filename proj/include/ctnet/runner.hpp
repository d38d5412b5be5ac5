#pragma once

#include "ctnet/checkpoint.hpp"
#include "ctnet/runspec.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace ctnet {

inline Dataset build_dataset(const RunSpec& spec) {
    const DataSource src = spec.data_source();
    switch (src.kind) {
        case DataSource::Kind::SynthSmooth:
            return synth_surrogate(SynthKind::SmoothMap, src.n_features, src.m_targets, src.n_samples,
                                   spec.data_seed);
        case DataSource::Kind::SynthOde:
            return synth_surrogate(SynthKind::ParametricODE, src.n_features, src.m_targets,
                                   src.n_samples, spec.data_seed);
        case DataSource::Kind::Csv:
            return load_csv(src.features_path, src.targets_path, src.orientation);
    }
    throw std::logic_error("build_dataset: unknown source kind");
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string metrics_csv(const RunMetrics& metrics) {
    std::string text = "epoch,train_loss,val_loss,cum_rhs_evals,wall_ms\n";
    char buf[200];
    for (const MetricsRow& r : metrics.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%lld,%.3f\n", r.epoch, r.train_loss,
                      r.val_loss, r.cum_rhs_evals, r.wall_ms);
        text += buf;
    }
    return text;
}

inline nlohmann::json data_manifest(const RunSpec& spec, const Dataset& full, const SplitResult& splits) {
    nlohmann::json j;
    j["source"] = spec.data;
    j["data_seed"] = spec.data_seed;
    j["n_features"] = full.n_features();
    j["m_targets"] = full.m_targets();
    j["n_samples"] = full.n_samples();
    j["split_seed"] = spec.split_seed;
    j["split_sizes"] = {splits.train.n_samples(), splits.val.n_samples(), splits.test.n_samples()};
    return j;
}

}  // namespace detail

struct TrainOutcome {
    int exit_code = 0;
    TrainStatus status = TrainStatus::Completed;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    double test_loss = 0.0;
    long long total_rhs_evals = 0;
    long trainable_params = 0;
    std::string error;
};

/// Train one RunSpec and write config.json, data_manifest.json,
/// metrics.csv, model.ckpt and summary.json into its output directory.
/// Everything except the wall-clock columns is reproducible from
/// config.json alone.
inline TrainOutcome cmd_train(const RunSpec& spec, std::ostream& log = std::cout) {
    TrainOutcome outcome;
    spec.validate();

    const std::string out = spec.resolved_out_dir();
    std::filesystem::create_directories(out);
    RunSpec resolved = spec;
    resolved.out_dir = out;
    detail::write_text(out + "/config.json", resolved.to_json().dump(2) + "\n");

    nlohmann::json summary;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Dataset full = build_dataset(spec);
        const SplitResult splits = split(full, spec.split_spec());
        detail::write_text(out + "/data_manifest.json",
                           detail::data_manifest(spec, full, splits).dump(2) + "\n");

        const ModelConfig cfg = spec.model_config(full.n_features(), full.m_targets());
        outcome.trainable_params = cfg.trainable_param_count();
        const TrainConfig tcfg = spec.train_config();

        const TrainResult result = train(cfg, splits.train, splits.val, tcfg);
        detail::write_text(out + "/metrics.csv", detail::metrics_csv(result.metrics));
        save_checkpoint(out + "/model.ckpt", cfg, result.params);

        outcome.status = result.status;
        outcome.total_rhs_evals = result.total_rhs_evals;
        if (!result.metrics.rows.empty()) {
            outcome.final_train_loss = result.metrics.rows.back().train_loss;
            outcome.final_val_loss = result.metrics.rows.back().val_loss;
        }
        EvalCounter test_counter;
        outcome.test_loss = evaluate_loss(splits.test, result.params, cfg, tcfg.ode, test_counter);

        summary["status"] = to_string(result.status);
        summary["message"] = result.message;
        summary["epochs_run"] = result.metrics.rows.size();
        summary["final_train_loss"] = outcome.final_train_loss;
        summary["final_val_loss"] = outcome.final_val_loss;
        summary["test_loss"] = outcome.test_loss;
        summary["total_rhs_evals"] = outcome.total_rhs_evals;
        summary["trainable_params"] = outcome.trainable_params;
        outcome.exit_code = result.status == TrainStatus::Diverged ? 2 : 0;
    } catch (const SolverError& e) {
        summary["status"] = "integrator_failure";
        summary["message"] = e.what();
        outcome.status = TrainStatus::Diverged;
        outcome.error = e.what();
        outcome.exit_code = 3;
    }
    summary["wall_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    detail::write_text(out + "/summary.json", summary.dump(2) + "\n");

    log << "train: " << to_string(outcome.status) << ", final train loss " << outcome.final_train_loss
        << ", rhs evals " << outcome.total_rhs_evals << ", artifacts in " << out << "\n";
    return outcome;
}

enum class SweepAxis { Degree, Basis, Arch, Depth };

inline SweepAxis parse_axis(const std::string& s) {
    if (s == "degree") return SweepAxis::Degree;
    if (s == "basis") return SweepAxis::Basis;
    if (s == "arch") return SweepAxis::Arch;
    if (s == "depth") return SweepAxis::Depth;
    throw std::invalid_argument("sweep: unknown axis '" + s + "' (degree|basis|arch|depth)");
}

/// Run the base spec once per axis value (shared seed), collecting one
/// sweep.csv row per run. A failed run is recorded in its row and the sweep
/// continues. Depth values reset the horizon; with vary_steps the step
/// count follows so that dt stays fixed.
inline int cmd_sweep(const RunSpec& base, SweepAxis axis, const std::vector<std::string>& values,
                     bool vary_steps = false, std::ostream& log = std::cout) {
    if (values.empty()) throw std::invalid_argument("sweep: no axis values given");
    base.validate();
    const std::string out = base.resolved_out_dir();
    std::filesystem::create_directories(out);

    std::string csv =
        "axis,value,arch,basis,degree,channels,steps,horizon,seed,status,final_train_loss,"
        "final_val_loss,test_loss,cum_rhs_evals,trainable_params\n";
    int failures = 0;
    const char* axis_name = axis == SweepAxis::Degree   ? "degree"
                            : axis == SweepAxis::Basis  ? "basis"
                            : axis == SweepAxis::Arch   ? "arch"
                                                        : "depth";
    for (const std::string& value : values) {
        RunSpec spec = base;
        switch (axis) {
            case SweepAxis::Degree: spec.degree = std::stoi(value); break;
            case SweepAxis::Basis: spec.basis = value; break;
            case SweepAxis::Arch: spec.arch = value; break;
            case SweepAxis::Depth: {
                const double t_new = std::stod(value);
                if (vary_steps) {
                    const double dt = base.horizon / base.steps;
                    spec.steps = std::max(1, static_cast<int>(std::llround(t_new / dt)));
                }
                spec.horizon = t_new;
                break;
            }
        }
        std::string value_dir = value;
        for (char& c : value_dir)
            if (c == '/' || c == ':' || c == '.') c = '_';
        spec.out_dir = out + "/" + axis_name + "_" + value_dir;

        std::string status;
        TrainOutcome o;
        try {
            o = cmd_train(spec, log);
            status = to_string(o.status);
            if (o.exit_code != 0) ++failures;
            if (!o.error.empty()) status = "integrator_failure";
        } catch (const std::exception& e) {
            status = "error";
            ++failures;
            log << "sweep: run " << axis_name << "=" << value << " failed: " << e.what() << "\n";
        }
        char buf[400];
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%d,%d,%d,%.17g,%llu,%s,%.17g,%.17g,%.17g,%lld,%ld\n",
                      axis_name, value.c_str(), spec.arch.c_str(), spec.basis.c_str(), spec.degree,
                      spec.channels, spec.steps, spec.horizon,
                      static_cast<unsigned long long>(spec.seed), status.c_str(), o.final_train_loss,
                      o.final_val_loss, o.test_loss, o.total_rhs_evals, o.trainable_params);
        csv += buf;
    }
    detail::write_text(out + "/sweep.csv", csv);
    log << "sweep: " << values.size() << " runs, " << failures << " failures, table in " << out
        << "/sweep.csv\n";
    return failures == 0 ? 0 : 1;
}

struct GradCheckRow {
    std::string block;
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Compare the analytic gradient of the spec's configuration against
/// central finite differences on a small deterministic batch, block by
/// block. corrupt_block (test hook) negates one analytic block so the
/// failure path can be exercised.
inline std::vector<GradCheckRow> gradient_check(const RunSpec& spec, double tolerance,
                                                const std::string& corrupt_block = "") {
    spec.validate();
    const Dataset full = build_dataset(spec);
    const SplitResult splits = split(full, spec.split_spec());
    const int batch = std::min(8, splits.train.n_samples());
    Matrix feat = splits.train.features.leftCols(batch);
    Matrix targ = splits.train.targets.leftCols(batch);

    const ModelConfig cfg = spec.model_config(full.n_features(), full.m_targets());
    const bool is_node = cfg.arch == Arch::NeuralODE;
    StepControl ctrl = spec.train_config().ode;
    if (is_node) {
        ctrl.rtol = std::min(ctrl.rtol, 1e-10);
        ctrl.atol = std::min(ctrl.atol, 1e-12);
    }
    const double h_fd = is_node ? 1e-4 : 1e-5;

    const FullParams params = init_params(cfg, spec.seed);
    EvalCounter counter;
    GradBundle analytic = model_gradient(feat, targ, params, cfg, ctrl, counter).grad;

    if (corrupt_block == "theta")
        analytic.theta = -analytic.theta;
    else if (corrupt_block == "K_in")
        analytic.K_in = -analytic.K_in;
    else if (corrupt_block == "b_in")
        analytic.b_in = -analytic.b_in;
    else if (corrupt_block == "W_out")
        analytic.W_out = -analytic.W_out;
    else if (corrupt_block == "b_out")
        analytic.b_out = -analytic.b_out;
    else if (!corrupt_block.empty())
        throw std::invalid_argument("gradient_check: unknown block '" + corrupt_block + "'");

    const GradBundle fd = finite_diff_gradient(
        [&](const FullParams& q) {
            EvalCounter fd_counter;
            return loss_value(predict(feat, q, cfg, ctrl, fd_counter), targ, q, cfg.alpha);
        },
        params, cfg, h_fd);

    auto flat = [](const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()).eval(); };
    std::vector<GradCheckRow> rows;
    auto add = [&](const std::string& name, const Vector& a, const Vector& b) {
        const double err = max_rel_error(a, b);
        rows.push_back({name, err, err <= tolerance});
    };
    add("theta", flat(analytic.theta), flat(fd.theta));
    add("K_in", flat(analytic.K_in), flat(fd.K_in));
    add("b_in", analytic.b_in, fd.b_in);
    add("W_out", flat(analytic.W_out), flat(fd.W_out));
    add("b_out", analytic.b_out, fd.b_out);
    return rows;
}

inline int cmd_gradcheck(const RunSpec& spec, double tolerance, const std::string& corrupt_block = "",
                         std::ostream& log = std::cout) {
    const std::vector<GradCheckRow> rows = gradient_check(spec, tolerance, corrupt_block);
    bool all_pass = true;
    char buf[160];
    log << "block      max_rel_err     result\n";
    for (const GradCheckRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %-15.3e %s\n", r.block.c_str(), r.max_rel_err,
                      r.pass ? "pass" : "FAIL");
        log << buf;
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

/// Conditioning table for the basis matrices on an equispaced unit grid,
/// emitted as CSV (kind,degree,cond2).
inline int cmd_condition(const std::vector<BasisFamily>& families, int degree_from, int degree_to,
                         int n_points, const std::string& output_path = "",
                         std::ostream& log = std::cout) {
    if (n_points < 1) throw std::invalid_argument("condition: need at least one grid point");
    const TimeGrid grid = TimeGrid::equispaced(0.0, 1.0, n_points);
    const auto rows = conditioning_report(families, degree_from, degree_to, grid);
    std::string csv = "kind,degree,cond2\n";
    char buf[120];
    for (const ConditionEntry& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.17g\n", to_string(r.family), r.degree, r.cond2);
        csv += buf;
    }
    if (output_path.empty())
        log << csv;
    else
        detail::write_text(output_path, csv);
    return 0;
}

}  // namespace ctnet
