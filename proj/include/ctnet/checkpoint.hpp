#pragma once

#include "ctnet/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace ctnet {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << fmt_double(m(r, c));
        }
        out << '\n';
    }
}

inline Matrix read_tensor(std::istream& in, const std::string& expect_name) {
    std::string kw, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> kw >> name >> rows >> cols) || kw != "tensor" || name != expect_name)
        throw std::runtime_error("checkpoint: expected tensor " + expect_name);
    if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint: bad tensor shape");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!(in >> m(r, c))) throw std::runtime_error("checkpoint: truncated tensor " + expect_name);
    return m;
}

}  // namespace detail

/// Plain-text checkpoint: a config block of key/value lines, then each
/// parameter tensor with an explicit shape header, values row-major at full
/// double precision (round-trips exactly).
inline void save_checkpoint(const std::string& path, const ModelConfig& cfg, const FullParams& params) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << "ctnet-checkpoint v1\n";
    out << "arch " << to_string(cfg.arch) << '\n';
    out << "channels " << cfg.channels << '\n';
    out << "n_features " << cfg.n_features << '\n';
    out << "m_targets " << cfg.m_targets << '\n';
    out << "horizon " << detail::fmt_double(cfg.horizon) << '\n';
    out << "n_steps " << cfg.n_steps << '\n';
    out << "basis " << to_string(cfg.basis.family) << ' ' << cfg.basis.degree << '\n';
    out << "activation " << (cfg.activation == Activation::Tanh ? "tanh" : "identity") << '\n';
    out << "alpha " << detail::fmt_double(cfg.alpha) << '\n';
    detail::write_tensor(out, "theta", params.weights.theta);
    detail::write_tensor(out, "K_in", params.opening.K_in);
    detail::write_tensor(out, "b_in", params.opening.b_in);
    detail::write_tensor(out, "W_out", params.closing.W_out);
    detail::write_tensor(out, "b_out", params.closing.b_out);
    out << "end\n";
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
    ModelConfig config;
    FullParams params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "ctnet-checkpoint" || version != "v1")
        throw std::runtime_error("load_checkpoint: unrecognized format in " + path);

    Checkpoint ck;
    auto expect_key = [&](const std::string& key) {
        std::string k;
        if (!(in >> k) || k != key) throw std::runtime_error("load_checkpoint: expected key " + key);
    };
    std::string word;
    expect_key("arch");
    in >> word;
    if (word == "resnet")
        ck.config.arch = Arch::ResNet;
    else if (word == "hamiltonian")
        ck.config.arch = Arch::Hamiltonian;
    else if (word == "node")
        ck.config.arch = Arch::NeuralODE;
    else
        throw std::runtime_error("load_checkpoint: unknown arch " + word);
    expect_key("channels");
    in >> ck.config.channels;
    expect_key("n_features");
    in >> ck.config.n_features;
    expect_key("m_targets");
    in >> ck.config.m_targets;
    expect_key("horizon");
    in >> ck.config.horizon;
    expect_key("n_steps");
    in >> ck.config.n_steps;
    expect_key("basis");
    in >> word >> ck.config.basis.degree;
    if (word == "monomial")
        ck.config.basis.family = BasisFamily::Monomial;
    else if (word == "legendre")
        ck.config.basis.family = BasisFamily::Legendre;
    else if (word == "none")
        ck.config.basis.family = BasisFamily::None;
    else
        throw std::runtime_error("load_checkpoint: unknown basis " + word);
    expect_key("activation");
    in >> word;
    ck.config.activation = word == "identity" ? Activation::Identity : Activation::Tanh;
    expect_key("alpha");
    in >> ck.config.alpha;

    ck.params.weights.theta = detail::read_tensor(in, "theta");
    ck.params.opening.K_in = detail::read_tensor(in, "K_in");
    Matrix b_in = detail::read_tensor(in, "b_in");
    ck.params.opening.b_in = b_in.col(0);
    ck.params.closing.W_out = detail::read_tensor(in, "W_out");
    Matrix b_out = detail::read_tensor(in, "b_out");
    ck.params.closing.b_out = b_out.col(0);

    std::string tail;
    in >> tail;
    if (tail != "end") throw std::runtime_error("load_checkpoint: missing end marker");
    ck.config.validate();
    return ck;
}

}  // namespace ctnet
