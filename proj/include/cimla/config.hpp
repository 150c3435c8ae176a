#pragma once
// JSON run configuration -> typed options, with every resolved default
// echoed back so the emitted manifest alone reproduces the run.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cimla/pipeline.hpp"
#include "cimla/simulate.hpp"

namespace cimla {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    in >> j;
    return j;
}

namespace cfg {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, json& resolved) {
    T value = j.contains(key) ? j.at(key).get<T>() : fallback;
    resolved[key] = value;
    return value;
}

inline ForestHyper forest_hyper_from_json(const json& j) {
    ForestHyper h;
    if (j.contains("n_trees")) h.n_trees = j.at("n_trees").get<int>();
    if (j.contains("max_depth")) h.max_depth = j.at("max_depth").is_null() ? -1 : j.at("max_depth").get<int>();
    if (j.contains("min_samples_leaf")) h.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    if (j.contains("max_leaves")) h.max_leaves = j.at("max_leaves").get<int>();
    if (j.contains("max_features")) {
        const auto& f = j.at("max_features");
        if (f.is_string()) {
            std::string s = f.get<std::string>();
            if (s == "sqrt") h.max_features = -1;
            else if (s == "third") h.max_features = -2;
            else throw std::runtime_error("max_features: expected 'sqrt', 'third' or a count");
        } else {
            h.max_features = f.get<int>();
        }
    }
    return h;
}

inline json forest_hyper_to_json(const ForestHyper& h) {
    json j;
    j["n_trees"] = h.n_trees;
    j["max_depth"] = h.max_depth;
    j["max_features"] = h.max_features == -1 ? json("sqrt")
                        : h.max_features == -2 ? json("third")
                                               : json(h.max_features);
    j["min_samples_leaf"] = h.min_samples_leaf;
    j["max_leaves"] = h.max_leaves;
    return j;
}

} // namespace cfg

// `resolved` receives the full option set actually used.
inline RunOptions run_options_from_json(const json& j, json& resolved) {
    RunOptions opts;
    opts.model_kind = cfg::get_or<std::string>(j, "model", "forest", resolved);
    if (opts.model_kind != "forest" && opts.model_kind != "mlp")
        throw std::runtime_error("model must be 'forest' or 'mlp'");
    opts.train_fraction = cfg::get_or<double>(j, "train_fraction", 0.8, resolved);
    opts.cv_folds = cfg::get_or<int>(j, "cv_folds", 3, resolved);
    opts.background_threshold = cfg::get_or<bool>(j, "background_threshold", false, resolved);
    opts.n_shuffles = cfg::get_or<int>(j, "n_shuffles", 1, resolved);
    opts.reliable_filter = cfg::get_or<bool>(j, "reliable_filter", false, resolved);
    opts.reliable_r2 = cfg::get_or<double>(j, "reliable_r2", 0.5, resolved);
    opts.workers = cfg::get_or<int>(j, "workers", 1, resolved);

    if (j.contains("forest_grid")) {
        opts.forest_grid.clear();
        for (const auto& entry : j.at("forest_grid"))
            opts.forest_grid.push_back(cfg::forest_hyper_from_json(entry));
    }
    json grid_json = json::array();
    for (const auto& h : opts.forest_grid) grid_json.push_back(cfg::forest_hyper_to_json(h));
    resolved["forest_grid"] = grid_json;

    json mlp_resolved;
    json mlp_json = j.contains("mlp") ? j.at("mlp") : json::object();
    opts.mlp.hidden = cfg::get_or<std::vector<int>>(mlp_json, "hidden", {64, 32}, mlp_resolved);
    opts.mlp.input_dropout_p = cfg::get_or<double>(mlp_json, "input_dropout_p", 0.0, mlp_resolved);
    opts.mlp.batch_size = cfg::get_or<int>(mlp_json, "batch_size", 128, mlp_resolved);
    opts.mlp.max_epochs = cfg::get_or<int>(mlp_json, "max_epochs", 200, mlp_resolved);
    opts.mlp.learning_rate = cfg::get_or<double>(mlp_json, "learning_rate", 1e-3, mlp_resolved);
    opts.mlp.patience = cfg::get_or<int>(mlp_json, "patience", 10, mlp_resolved);
    opts.mlp.val_fraction = cfg::get_or<double>(mlp_json, "val_fraction", 0.1, mlp_resolved);
    resolved["mlp"] = mlp_resolved;

    json attr_resolved;
    json attr_json = j.contains("attribution") ? j.at("attribution") : json::object();
    opts.attr.estimator = cfg::get_or<std::string>(attr_json, "estimator", "sampled", attr_resolved);
    if (opts.attr.estimator != "sampled" && opts.attr.estimator != "exact")
        throw std::runtime_error("attribution.estimator must be 'exact' or 'sampled'");
    opts.attr.n_permutations = cfg::get_or<int>(attr_json, "n_permutations", 64, attr_resolved);
    opts.attr.exact_limit = cfg::get_or<int>(attr_json, "exact_limit", 15, attr_resolved);
    opts.attr.background_rows =
        cfg::get_or<std::size_t>(attr_json, "background_rows", 256, attr_resolved);
    opts.attr.sample_source =
        cfg::get_or<std::string>(attr_json, "sample_source", "train", attr_resolved);
    opts.attr.max_samples = cfg::get_or<std::size_t>(attr_json, "max_samples", 0, attr_resolved);
    opts.attr.batched = cfg::get_or<bool>(attr_json, "batched", true, attr_resolved);
    resolved["attribution"] = attr_resolved;
    return opts;
}

struct SimSpec {
    RandomGrnSpec grn;
    double shared_fraction = 0.8;
    std::string mode = "low";          // "low" | "high"
    std::size_t cells = 1000;
    double noise_scale = 0.5;
    double dropout = 0.0;
    double dropout_shape = 8.0;
    ConfoundingMode low, high;
    SimOptions dynamics;
};

inline SimSpec sim_spec_from_json(const json& j, json& resolved) {
    SimSpec s;
    s.grn.n_genes = cfg::get_or<int>(j, "genes", 50, resolved);
    s.grn.n_mrs = cfg::get_or<int>(j, "mrs", 10, resolved);
    s.grn.n_regulators = cfg::get_or<int>(j, "regulators", 15, resolved);
    s.grn.n_edges = cfg::get_or<int>(j, "edges", 150, resolved);
    s.grn.activator_fraction = cfg::get_or<double>(j, "activator_fraction", 0.7, resolved);
    auto strength = cfg::get_or<std::vector<double>>(j, "strength_range", {1.0, 4.0}, resolved);
    if (strength.size() != 2) throw std::runtime_error("strength_range: expected [min, max]");
    s.grn.strength_min = strength[0];
    s.grn.strength_max = strength[1];
    s.grn.hill_coeff = cfg::get_or<double>(j, "hill", 2.0, resolved);
    s.shared_fraction = cfg::get_or<double>(j, "shared_fraction", 0.8, resolved);
    s.mode = cfg::get_or<std::string>(j, "mode", "low", resolved);
    s.cells = cfg::get_or<std::size_t>(j, "cells", 1000, resolved);
    s.noise_scale = cfg::get_or<double>(j, "noise_scale", 0.5, resolved);
    s.dropout = cfg::get_or<double>(j, "dropout", 0.0, resolved);
    s.dropout_shape = cfg::get_or<double>(j, "dropout_shape", 8.0, resolved);
    auto low_range = cfg::get_or<std::vector<double>>(j, "mr_range_low", {1.0, 4.0}, resolved);
    auto case_range = cfg::get_or<std::vector<double>>(j, "mr_range_case", {0.5, 2.5}, resolved);
    auto control_range = cfg::get_or<std::vector<double>>(j, "mr_range_control", {3.0, 6.0}, resolved);
    if (low_range.size() != 2 || case_range.size() != 2 || control_range.size() != 2)
        throw std::runtime_error("mr ranges: expected [min, max]");
    s.low = ConfoundingMode::low_confounding(low_range[0], low_range[1]);
    s.high = ConfoundingMode::high_confounding(case_range[0], case_range[1], control_range[0],
                                               control_range[1]);
    s.dynamics.noise_steps = cfg::get_or<int>(j, "noise_steps", 1000, resolved);
    return s;
}

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           std::uint64_t seed, const json& resolved_config,
                           const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = "cimla";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = resolved_config;
    m["outputs"] = outputs;
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
    out << m.dump(2) << "\n";
}

} // namespace cimla
