#pragma once
// Model persistence. Self-describing versioned text with hexfloat payloads,
// so a round trip reproduces predictions bit for bit.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cimla/forest.hpp"
#include "cimla/mlp.hpp"

namespace cimla {

namespace detail {

inline std::string hexf(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double parse_hexf(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

} // namespace detail

inline void save_forest(const RandomForest& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const ForestHyper& hp = f.hyper();
    out << "cimla-forest v1\n";
    out << "features " << f.feature_count() << "\n";
    out << "hyper " << hp.n_trees << ' ' << hp.max_depth << ' ' << hp.max_features << ' '
        << hp.min_samples_leaf << ' ' << hp.max_leaves << "\n";
    out << "trees " << f.n_trees() << "\n";
    for (const auto& tree : f.trees()) {
        out << "tree " << tree.nodes().size() << "\n";
        for (const auto& n : tree.nodes())
            out << n.feature << ' ' << detail::hexf(n.threshold) << ' ' << n.left << ' ' << n.right
                << ' ' << detail::hexf(n.value) << ' ' << n.n_samples << ' ' << detail::hexf(n.gain)
                << "\n";
    }
}

inline RandomForest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string tag, version;
    in >> tag >> version;
    if (tag != "cimla-forest" || version != "v1")
        throw std::runtime_error("not a cimla forest file: " + path);
    std::string key;
    std::size_t features = 0, n_trees = 0;
    ForestHyper hp;
    in >> key >> features;
    in >> key >> hp.n_trees >> hp.max_depth >> hp.max_features >> hp.min_samples_leaf >> hp.max_leaves;
    in >> key >> n_trees;
    std::vector<DecisionTree> trees(n_trees);
    for (auto& tree : trees) {
        std::size_t n_nodes = 0;
        in >> key >> n_nodes;
        tree.nodes().resize(n_nodes);
        for (auto& n : tree.nodes()) {
            std::string thr, val, gain;
            in >> n.feature >> thr >> n.left >> n.right >> val >> n.n_samples >> gain;
            n.threshold = detail::parse_hexf(thr);
            n.value = detail::parse_hexf(val);
            n.gain = detail::parse_hexf(gain);
        }
    }
    if (!in) throw std::runtime_error("truncated forest file: " + path);
    return RandomForest(std::move(trees), hp, features);
}

inline void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "cimla-mlp v1\n";
    out << "dropout " << detail::hexf(net.input_dropout_p) << "\n";
    out << "layers " << net.weights.size() << "\n";
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Matrix& w = net.weights[l];
        out << "layer " << w.rows() << ' ' << w.cols() << "\n";
        for (double v : w.data()) out << detail::hexf(v) << "\n";
        for (double v : net.biases[l]) out << detail::hexf(v) << "\n";
    }
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string tag, version, key, tok;
    in >> tag >> version;
    if (tag != "cimla-mlp" || version != "v1")
        throw std::runtime_error("not a cimla mlp file: " + path);
    Mlp net;
    in >> key >> tok;
    net.input_dropout_p = detail::parse_hexf(tok);
    std::size_t layers = 0;
    in >> key >> layers;
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t rows = 0, cols = 0;
        in >> key >> rows >> cols;
        Matrix w(rows, cols);
        for (double& v : w.data()) {
            in >> tok;
            v = detail::parse_hexf(tok);
        }
        std::vector<double> b(rows);
        for (double& v : b) {
            in >> tok;
            v = detail::parse_hexf(tok);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    if (!in) throw std::runtime_error("truncated mlp file: " + path);
    return net;
}

} // namespace cimla
