#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aenode/dataset.hpp"
#include "aenode/model.hpp"

namespace aenode {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON codecs. Doubles round-trip exactly (shortest representation), so
// a reloaded checkpoint is bit-identical to the saved one.
// ---------------------------------------------------------------------------

inline json to_json(const Mat& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Mat mat_from_json(const json& j) {
    const long rows = static_cast<long>(j.size());
    if (rows == 0) return Mat(0, 0);
    const long cols = static_cast<long>(j.at(0).size());
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

inline json to_json(const Vec& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = j.at(i).get<double>();
    return v;
}

inline json to_json(const MlpParams& p) {
    json layers = json::array();
    for (const auto& l : p.layers) layers.push_back({{"weights", to_json(l.weights)}, {"bias", to_json(l.bias)}});
    return {{"elu_alpha", p.elu_alpha}, {"layers", std::move(layers)}};
}

inline MlpParams mlp_from_json(const json& j) {
    MlpParams p;
    p.elu_alpha = j.at("elu_alpha").get<double>();
    for (const auto& l : j.at("layers"))
        p.layers.push_back({mat_from_json(l.at("weights")), vec_from_json(l.at("bias"))});
    check_mlp_shapes(p);
    return p;
}

inline json to_json(const NormInfo& n) {
    return {{"min", to_json(n.mins)},
            {"max", to_json(n.maxs)},
            {"degenerate", json(std::vector<int>(n.degenerate.begin(), n.degenerate.end()))}};
}

inline NormInfo norm_from_json(const json& j) {
    NormInfo n;
    n.mins = vec_from_json(j.at("min"));
    n.maxs = vec_from_json(j.at("max"));
    for (const auto& d : j.at("degenerate")) n.degenerate.push_back(d.get<int>() ? 1 : 0);
    return n;
}

inline json to_json(const AENodeModel& m) {
    return {{"encoder", to_json(m.encoder)}, {"node", to_json(m.node)}, {"decoder", to_json(m.decoder)}};
}

inline AENodeModel model_from_json(const json& j) {
    AENodeModel m;
    m.encoder = mlp_from_json(j.at("encoder"));
    m.node = mlp_from_json(j.at("node"));
    m.decoder = mlp_from_json(j.at("decoder"));
    m.check();
    return m;
}

inline json to_json(const TrainConfig& c) {
    return {{"eps1", c.eps1},
            {"eps2", c.eps2},
            {"eps3", c.eps3},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"passes", c.passes},
            {"latent_steps", c.latent_steps},
            {"sequential", c.sequential},
            {"snapshot_cap", c.snapshot_cap},
            {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.eps1 = j.at("eps1").get<double>();
    c.eps2 = j.at("eps2").get<double>();
    c.eps3 = j.at("eps3").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.passes = j.at("passes").get<int>();
    c.latent_steps = j.at("latent_steps").get<int>();
    c.sequential = j.at("sequential").get<bool>();
    c.snapshot_cap = j.at("snapshot_cap").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline json grads_to_json(const MlpGrads& g) {
    json layers = json::array();
    for (const auto& l : g) layers.push_back({{"weights", to_json(l.weights)}, {"bias", to_json(l.bias)}});
    return layers;
}

inline MlpGrads grads_from_json(const json& j) {
    MlpGrads g;
    for (const auto& l : j) g.push_back({mat_from_json(l.at("weights")), vec_from_json(l.at("bias"))});
    return g;
}

inline json to_json(const AdamState& s) {
    return {{"step", s.step},
            {"lr", s.cfg.lr},
            {"beta1", s.cfg.beta1},
            {"beta2", s.cfg.beta2},
            {"eps", s.cfg.eps},
            {"m", grads_to_json(s.m)},
            {"v", grads_to_json(s.v)}};
}

inline AdamState adam_from_json(const json& j) {
    AdamState s;
    s.step = j.at("step").get<long>();
    s.cfg.lr = j.at("lr").get<double>();
    s.cfg.beta1 = j.at("beta1").get<double>();
    s.cfg.beta2 = j.at("beta2").get<double>();
    s.cfg.eps = j.at("eps").get<double>();
    s.m = grads_from_json(j.at("m"));
    s.v = grads_from_json(j.at("v"));
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint: model + normalization + optimizer/loop state, enough to
// resume an interrupted run bit-identically.
// ---------------------------------------------------------------------------

struct Checkpoint {
    AENodeModel model;
    NormInfo norm;
    TrainConfig config;
    std::string system;
    std::vector<std::string> var_names;
    TrainState state;
    bool has_state = false;
};

inline void save_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for write: " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

inline json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    json j{{"format", "aenode-checkpoint"},
           {"version", 1},
           {"system", ck.system},
           {"var_names", ck.var_names},
           {"model", to_json(ck.model)},
           {"norm", to_json(ck.norm)},
           {"train_config", to_json(ck.config)}};
    if (ck.has_state) {
        j["train_state"] = {{"passes_done", ck.state.passes_done},
                            {"iter", ck.state.iter},
                            {"best_test_loss", ck.state.best_test_loss},
                            {"accepted_epochs", ck.state.accepted_epochs},
                            {"shuffle_rng_state", ck.state.shuffle_rng_state},
                            {"adam_encoder", to_json(ck.state.opt.encoder)},
                            {"adam_node", to_json(ck.state.opt.node)},
                            {"adam_decoder", to_json(ck.state.opt.decoder)}};
    }
    save_json(path, j);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const json j = load_json(path);
    if (j.value("format", "") != "aenode-checkpoint")
        throw ParseError(path.string() + ": not a checkpoint file");
    Checkpoint ck;
    ck.system = j.value("system", "");
    if (j.contains("var_names")) ck.var_names = j.at("var_names").get<std::vector<std::string>>();
    ck.model = model_from_json(j.at("model"));
    ck.norm = norm_from_json(j.at("norm"));
    ck.config = train_config_from_json(j.at("train_config"));
    if (j.contains("train_state")) {
        const auto& s = j.at("train_state");
        ck.state.passes_done = s.at("passes_done").get<int>();
        ck.state.iter = s.at("iter").get<long>();
        ck.state.best_test_loss = s.at("best_test_loss").get<double>();
        ck.state.accepted_epochs = s.at("accepted_epochs").get<int>();
        ck.state.shuffle_rng_state = s.at("shuffle_rng_state").get<std::uint64_t>();
        ck.state.opt.encoder = adam_from_json(s.at("adam_encoder"));
        ck.state.opt.node = adam_from_json(s.at("adam_node"));
        ck.state.opt.decoder = adam_from_json(s.at("adam_decoder"));
        ck.has_state = true;
    }
    return ck;
}

inline void save_snapshot(const std::filesystem::path& path, int epoch, double test_loss,
                          const AENodeModel& model) {
    save_json(path, json{{"format", "aenode-snapshot"},
                         {"version", 1},
                         {"epoch", epoch},
                         {"test_loss", test_loss},
                         {"model", to_json(model)}});
}

struct LoadedSnapshot {
    int epoch = 0;
    double test_loss = 0.0;
    AENodeModel model;
};

inline LoadedSnapshot load_snapshot(const std::filesystem::path& path) {
    const json j = load_json(path);
    if (j.value("format", "") != "aenode-snapshot") throw ParseError(path.string() + ": not a snapshot file");
    return {j.at("epoch").get<int>(), j.at("test_loss").get<double>(), model_from_json(j.at("model"))};
}

// ---------------------------------------------------------------------------
// Dataset manifest: trajectory file list, normalization, shuffled split
// indices, seed.
// ---------------------------------------------------------------------------

inline void save_dataset_manifest(const std::filesystem::path& path, const Dataset& ds,
                                  const std::vector<std::string>& trajectory_files) {
    json j{{"format", "aenode-dataset"},
           {"version", 1},
           {"system", ds.system_name},
           {"seed", ds.seed},
           {"split_ratio", ds.split_ratio},
           {"norm", to_json(ds.norm)},
           {"trajectory_files", trajectory_files},
           {"train_indices", ds.train_idx},
           {"test_indices", ds.test_idx}};
    save_json(path, j);
}

/// Load a dataset back from its manifest; trajectory CSVs are resolved
/// relative to the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace aenode

#include "aenode/io.hpp"

namespace aenode {

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const json j = load_json(manifest_path);
    if (j.value("format", "") != "aenode-dataset")
        throw ParseError(manifest_path.string() + ": not a dataset manifest");
    Dataset ds;
    ds.system_name = j.value("system", "");
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.split_ratio = j.at("split_ratio").get<double>();
    ds.norm = norm_from_json(j.at("norm"));
    const auto dir = manifest_path.parent_path();
    for (const auto& f : j.at("trajectory_files"))
        ds.trajectories.push_back(read_trajectory_csv(dir / f.get<std::string>()));
    ds.rebuild_pairs();
    ds.train_idx = j.at("train_indices").get<std::vector<std::size_t>>();
    ds.test_idx = j.at("test_indices").get<std::vector<std::size_t>>();
    for (auto i : ds.train_idx)
        if (i >= ds.pairs.size()) throw ParseError(manifest_path.string() + ": train index out of range");
    for (auto i : ds.test_idx)
        if (i >= ds.pairs.size()) throw ParseError(manifest_path.string() + ": test index out of range");
    return ds;
}

}  // namespace aenode
