#pragma once

#include "ctnet/data.hpp"
#include "ctnet/model.hpp"
#include "ctnet/optimizer.hpp"

#include <json.hpp>

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace ctnet {

/// Where the training data comes from: a synthetic generator or a CSV pair.
struct DataSource {
    enum class Kind { SynthSmooth, SynthOde, Csv };
    Kind kind = Kind::SynthSmooth;
    int n_features = 15;
    int m_targets = 10;
    int n_samples = 2486;
    std::string features_path;
    std::string targets_path;
    CsvOrientation orientation = CsvOrientation::SamplesAsCols;

    /// Descriptor grammar: synth:smooth:NF:M:NS | synth:ode:NF:M:NS |
    /// csv:FEATURES:TARGETS:rows|cols
    static DataSource parse(const std::string& text) {
        std::vector<std::string> parts;
        std::size_t at = 0;
        while (at <= text.size()) {
            const std::size_t next = text.find(':', at);
            if (next == std::string::npos) {
                parts.push_back(text.substr(at));
                break;
            }
            parts.push_back(text.substr(at, next - at));
            at = next + 1;
        }
        DataSource src;
        if (parts.size() == 5 && parts[0] == "synth" && (parts[1] == "smooth" || parts[1] == "ode")) {
            src.kind = parts[1] == "smooth" ? Kind::SynthSmooth : Kind::SynthOde;
            src.n_features = std::stoi(parts[2]);
            src.m_targets = std::stoi(parts[3]);
            src.n_samples = std::stoi(parts[4]);
            if (src.n_features < 1 || src.m_targets < 1 || src.n_samples < 1)
                throw std::invalid_argument("data descriptor: dimensions must be positive");
            return src;
        }
        if (parts.size() == 4 && parts[0] == "csv") {
            src.kind = Kind::Csv;
            src.features_path = parts[1];
            src.targets_path = parts[2];
            if (parts[3] == "rows")
                src.orientation = CsvOrientation::SamplesAsRows;
            else if (parts[3] == "cols")
                src.orientation = CsvOrientation::SamplesAsCols;
            else
                throw std::invalid_argument("data descriptor: orientation must be rows or cols");
            return src;
        }
        throw std::invalid_argument(
            "data descriptor: expected synth:smooth:NF:M:NS, synth:ode:NF:M:NS or "
            "csv:FEATURES:TARGETS:rows|cols, got '" +
            text + "'");
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::SynthSmooth:
                return "synth:smooth:" + std::to_string(n_features) + ':' + std::to_string(m_targets) +
                       ':' + std::to_string(n_samples);
            case Kind::SynthOde:
                return "synth:ode:" + std::to_string(n_features) + ':' + std::to_string(m_targets) +
                       ':' + std::to_string(n_samples);
            case Kind::Csv:
                return "csv:" + features_path + ':' + targets_path + ':' +
                       (orientation == CsvOrientation::SamplesAsRows ? "rows" : "cols");
        }
        return "?";
    }
};

/// One fully resolved run: model, training protocol, data source and output
/// directory, serializable as a single JSON document.
struct RunSpec {
    std::string arch = "resnet";
    std::string basis = "legendre";
    int degree = 3;
    int channels = 15;
    int steps = 12;
    double horizon = 1.0;
    double alpha = 0.0;

    int epochs = 100;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::optional<double> loss_tolerance;
    bool shuffle = true;
    double rtol = 1e-6;
    double atol = 1e-8;

    std::string data = "synth:smooth:15:10:2486";
    std::uint64_t data_seed = 0;
    std::vector<double> split_fractions = {0.7, 0.2, 0.1};
    std::uint64_t split_seed = 0;

    std::string out_dir;

    Arch arch_enum() const {
        if (arch == "resnet") return Arch::ResNet;
        if (arch == "hamiltonian") return Arch::Hamiltonian;
        if (arch == "node") return Arch::NeuralODE;
        throw std::invalid_argument("RunSpec: unknown arch '" + arch + "' (resnet|hamiltonian|node)");
    }

    BasisFamily basis_enum() const {
        if (basis == "legendre") return BasisFamily::Legendre;
        if (basis == "monomial") return BasisFamily::Monomial;
        if (basis == "none") return BasisFamily::None;
        throw std::invalid_argument("RunSpec: unknown basis '" + basis + "' (legendre|monomial|none)");
    }

    DataSource data_source() const { return DataSource::parse(data); }

    /// All checks that need no data: performed before any computation.
    void validate() const {
        const Arch a = arch_enum();
        const BasisFamily f = basis_enum();
        if (a == Arch::NeuralODE && f == BasisFamily::None)
            throw std::invalid_argument(
                "RunSpec: unsupported configuration: the neural ODE requires a polynomial basis "
                "(use --basis legendre --degree 0 for constant-in-time weights)");
        if (f != BasisFamily::None && degree < 0)
            throw std::invalid_argument("RunSpec: degree must be >= 0");
        if (channels < 1) throw std::invalid_argument("RunSpec: channels must be positive");
        if (a == Arch::Hamiltonian && channels % 2 != 0)
            throw std::invalid_argument("RunSpec: the Hamiltonian architecture needs an even channel count");
        if (steps < 1) throw std::invalid_argument("RunSpec: steps must be positive");
        if (horizon <= 0) throw std::invalid_argument("RunSpec: horizon must be positive");
        if (alpha < 0) throw std::invalid_argument("RunSpec: alpha must be non-negative");
        if (epochs < 1) throw std::invalid_argument("RunSpec: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("RunSpec: batch_size must be >= 1");
        if (lr <= 0) throw std::invalid_argument("RunSpec: lr must be positive");
        if (rtol <= 0 || atol <= 0) throw std::invalid_argument("RunSpec: tolerances must be positive");
        if (split_fractions.size() != 3)
            throw std::invalid_argument("RunSpec: split needs exactly three fractions");
        SplitSpec s{split_fractions[0], split_fractions[1], split_fractions[2], split_seed};
        s.validate();
        data_source();  // parses or throws
    }

    ModelConfig model_config(int n_features, int m_targets) const {
        ModelConfig cfg;
        cfg.arch = arch_enum();
        cfg.channels = channels;
        cfg.n_features = n_features;
        cfg.m_targets = m_targets;
        cfg.horizon = horizon;
        cfg.n_steps = steps;
        cfg.basis = {basis_enum(), degree};
        cfg.alpha = alpha;
        cfg.validate();
        return cfg;
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.lr = lr;
        t.seed = seed;
        t.loss_tolerance = loss_tolerance;
        t.shuffle = shuffle;
        t.ode.rtol = rtol;
        t.ode.atol = atol;
        t.validate();
        return t;
    }

    SplitSpec split_spec() const {
        return SplitSpec{split_fractions[0], split_fractions[1], split_fractions[2], split_seed};
    }

    std::string resolved_out_dir() const {
        if (!out_dir.empty()) return out_dir;
        const char* root = std::getenv("CTNET_OUT_ROOT");
        return std::string(root && *root ? root : "runs") + "/run";
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["arch"] = arch;
        j["basis"] = basis;
        j["degree"] = degree;
        j["channels"] = channels;
        j["steps"] = steps;
        j["horizon"] = horizon;
        j["alpha"] = alpha;
        j["epochs"] = epochs;
        j["batch_size"] = batch_size;
        j["lr"] = lr;
        j["seed"] = seed;
        if (loss_tolerance)
            j["loss_tolerance"] = *loss_tolerance;
        else
            j["loss_tolerance"] = nullptr;
        j["shuffle"] = shuffle;
        j["rtol"] = rtol;
        j["atol"] = atol;
        j["data"] = data;
        j["data_seed"] = data_seed;
        j["split"] = split_fractions;
        j["split_seed"] = split_seed;
        j["out_dir"] = out_dir;
        return j;
    }

    /// Strict parse: every key must be known and well-typed.
    static RunSpec from_json(const nlohmann::json& j) {
        RunSpec s;
        for (const auto& [key, value] : j.items()) {
            if (key == "arch")
                s.arch = value.get<std::string>();
            else if (key == "basis")
                s.basis = value.get<std::string>();
            else if (key == "degree")
                s.degree = value.get<int>();
            else if (key == "channels")
                s.channels = value.get<int>();
            else if (key == "steps")
                s.steps = value.get<int>();
            else if (key == "horizon")
                s.horizon = value.get<double>();
            else if (key == "alpha")
                s.alpha = value.get<double>();
            else if (key == "epochs")
                s.epochs = value.get<int>();
            else if (key == "batch_size")
                s.batch_size = value.get<int>();
            else if (key == "lr")
                s.lr = value.get<double>();
            else if (key == "seed")
                s.seed = value.get<std::uint64_t>();
            else if (key == "loss_tolerance") {
                if (value.is_null())
                    s.loss_tolerance.reset();
                else
                    s.loss_tolerance = value.get<double>();
            } else if (key == "shuffle")
                s.shuffle = value.get<bool>();
            else if (key == "rtol")
                s.rtol = value.get<double>();
            else if (key == "atol")
                s.atol = value.get<double>();
            else if (key == "data")
                s.data = value.get<std::string>();
            else if (key == "data_seed")
                s.data_seed = value.get<std::uint64_t>();
            else if (key == "split")
                s.split_fractions = value.get<std::vector<double>>();
            else if (key == "split_seed")
                s.split_seed = value.get<std::uint64_t>();
            else if (key == "out_dir")
                s.out_dir = value.get<std::string>();
            else
                throw std::invalid_argument("RunSpec: unknown key '" + key + "'");
        }
        return s;
    }
};

}  // namespace ctnet
