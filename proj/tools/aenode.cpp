// aenode: train autoencoder + neural-ODE reduced-order models of stiff
// systems and emit information-plane / DPI / PDF / stiffness analyses as
// CSV and JSON for external plotting.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "aenode/analysis.hpp"
#include "aenode/dataset.hpp"
#include "aenode/dynsys.hpp"
#include "aenode/infometrics.hpp"
#include "aenode/io.hpp"
#include "aenode/model.hpp"
#include "aenode/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aenode;

namespace {

struct Range {
    double lo = 0.0, hi = 0.0, step = 0.0;
};

Range parse_range(const std::string& spec) {
    Range r;
    const auto c1 = spec.find(':');
    if (c1 == std::string::npos) {
        r.lo = r.hi = parse_double(spec);
        return r;
    }
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ConfigError("range must be lo:hi:step, got '" + spec + "'");
    r.lo = parse_double(spec.substr(0, c1));
    r.hi = parse_double(spec.substr(c1 + 1, c2 - c1 - 1));
    r.step = parse_double(spec.substr(c2 + 1));
    if (r.hi < r.lo || r.step < 0) throw ConfigError("bad range '" + spec + "'");
    return r;
}

/// Flags beat the config file, the config file beats defaults.
template <typename T>
void backfill(const CLI::Option* opt, const json& section, const std::string& key, T& var) {
    if (opt && opt->count() == 0 && section.contains(key)) var = section.at(key).get<T>();
}

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir(out);
    if (fs::exists(dir / "resolved_config.json"))
        throw ConfigError("output directory '" + out + "' already holds a run; pick a fresh directory");
    fs::create_directories(dir);
    return dir;
}

void write_resolved_config(const fs::path& dir, const std::string& command, json resolved) {
    resolved["command"] = command;
    save_json(dir / "resolved_config.json", resolved);
}

StiffSystem system_by_name(const std::string& name) {
    if (name == "ignition") return make_ignition_system();
    if (name == "robertson") return make_robertson_system();
    throw ConfigError("unknown system '" + name + "' (expected ignition or robertson)");
}

fs::path resolve_manifest(const std::string& data) {
    fs::path p(data);
    if (fs::is_directory(p)) p /= "dataset.json";
    if (!fs::exists(p)) throw ConfigError("dataset manifest not found: " + p.string());
    return p;
}

std::vector<std::string> dataset_var_names(const Dataset& ds) {
    if (ds.system_name == "ignition") return make_ignition_system().var_names;
    if (ds.system_name == "robertson") return make_robertson_system().var_names;
    std::vector<std::string> names;
    for (int j = 0; j < ds.dim(); ++j) names.push_back("y" + std::to_string(j + 1));
    return names;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string system = "ignition";
    std::string t_init = "1000:1100:50";
    std::string phi = "0.5:1.5:0.1";
    double t_end = 6e-3;
    double tol = 1e-8;
    int samples = 48;
    double densify_threshold = 0.01;
    int max_refine_depth = 12;
    double split = 0.8;
    std::string ingest;
};

int cmd_gen_data(const GenDataArgs& a, std::uint64_t seed, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);

    Dataset ds;
    if (!a.ingest.empty()) {
        const auto trajs = ingest_csv(a.ingest);
        ds = dataset_from_trajectories(trajs, a.split, seed, trajs.front().system);
    } else {
        const StiffSystem sys = system_by_name(a.system);
        GenerateOptions opt;
        opt.t_end = a.t_end;
        opt.tol = a.tol;
        opt.snapshot.samples_per_traj = a.samples;
        opt.snapshot.densify_threshold = a.densify_threshold;
        opt.snapshot.max_refine_depth = a.max_refine_depth;
        opt.split_ratio = a.split;
        opt.seed = seed;
        std::vector<InitialCondition> sweep;
        if (a.system == "ignition") {
            const Range t = parse_range(a.t_init);
            const Range p = parse_range(a.phi);
            sweep = ignition_sweep(t.lo, t.hi, t.step, p.lo, p.hi, p.step);
        } else {
            Vec y0(3);
            y0 << 1.0, 0.0, 0.0;
            sweep.push_back({y0, {}});
        }
        ds = generate_dataset(sys, sweep, opt);
    }

    fs::create_directories(dir / "trajectories");
    std::vector<std::string> files;
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "trajectories/traj_%05zu.csv", i);
        write_trajectory_csv(dir / name, ds.trajectories[i]);
        files.emplace_back(name);
    }
    save_dataset_manifest(dir / "dataset.json", ds, files);

    json resolved{{"system", a.system},       {"t_init", a.t_init},
                  {"phi", a.phi},             {"t_end", a.t_end},
                  {"tol", a.tol},             {"samples", a.samples},
                  {"densify_threshold", a.densify_threshold},
                  {"max_refine_depth", a.max_refine_depth},
                  {"split", a.split},         {"ingest", a.ingest},
                  {"seed", seed},             {"out", out}};
    write_resolved_config(dir, "gen-data", resolved);

    std::cout << "gen-data: " << ds.trajectories.size() << " trajectories, " << ds.pairs.size()
              << " snapshot pairs (" << ds.train_idx.size() << " train / " << ds.test_idx.size()
              << " test) -> " << dir.string() << "\n";
    if (ds.norm.any_degenerate())
        std::cout << "warning: degenerate variables normalized to constant 0\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    int n_latent = 5;
    int width = 100;
    int depth = 5;
    std::vector<double> epsilon{1.0, 1.0, 1.0};
    double lr = 1e-3;
    int batch = 32;
    int passes = 40;
    int latent_steps = 4;
    bool summed = false;
    int snapshot_cap = 64;
    std::string resume;
};

TrainConfig to_train_config(const TrainArgs& a, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.eps1 = a.epsilon.at(0);
    cfg.eps2 = a.epsilon.at(1);
    cfg.eps3 = a.epsilon.at(2);
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    cfg.passes = a.passes;
    cfg.latent_steps = a.latent_steps;
    cfg.sequential = !a.summed;
    cfg.snapshot_cap = a.snapshot_cap;
    cfg.seed = seed;
    return cfg;
}

void write_training_log(const fs::path& path, const TrainHistory& hist) {
    std::ofstream log(path);
    log << "iter,epoch_accepted,L1,L2,L3,test_loss\n";
    for (const auto& it : hist.iterations) {
        log << it.iter << ',' << it.epochs_accepted << ',' << format_double(it.l1) << ','
            << format_double(it.l2) << ',' << format_double(it.l3) << ','
            << (it.test_evaluated ? format_double(it.test_loss) : "") << '\n';
    }
}

int cmd_train(const TrainArgs& a, std::uint64_t seed, const std::string& out) {
    if (a.data.empty()) throw ConfigError("train: --data is required");
    const fs::path dir = prepare_out_dir(out);
    const Dataset ds = load_dataset(resolve_manifest(a.data));

    AENodeModel model;
    TrainConfig cfg;
    TrainState state;
    bool resuming = false;
    if (!a.resume.empty()) {
        Checkpoint ck = load_checkpoint(a.resume);
        if (!ck.has_state) throw ConfigError("checkpoint has no training state to resume from");
        model = ck.model;
        cfg = ck.config;
        cfg.passes = a.passes;  // new total budget
        state = ck.state;
        resuming = true;
    } else {
        cfg = to_train_config(a, seed);
        Rng rng = Rng(seed).fork(2);
        model = build_model({ds.dim(), a.n_latent, a.width, a.depth}, rng);
    }

    const fs::path snap_dir = dir / "snapshots";
    fs::create_directories(snap_dir);
    auto snap_path = [&](int epoch) {
        char name[64];
        std::snprintf(name, sizeof(name), "epoch_%05d.json", epoch);
        return snap_dir / name;
    };
    if (!resuming) save_snapshot(snap_path(0), 0, std::numeric_limits<double>::infinity(), model);

    const TrainHistory hist = train(
        model, ds, cfg,
        [&](int epoch, const AENodeModel& m, double test_loss) {
            save_snapshot(snap_path(epoch), epoch, test_loss, m);
        },
        &state);

    write_training_log(dir / "training_log.csv", hist);
    Checkpoint ck;
    ck.model = model;
    ck.norm = ds.norm;
    ck.config = cfg;
    ck.system = ds.system_name;
    ck.var_names = dataset_var_names(ds);
    ck.state = state;
    ck.has_state = true;
    save_checkpoint(dir / "checkpoint.json", ck);

    json resolved{{"data", a.data},
                  {"n_latent", a.n_latent},
                  {"width", a.width},
                  {"depth", a.depth},
                  {"epsilon", a.epsilon},
                  {"lr", a.lr},
                  {"batch", a.batch},
                  {"passes", a.passes},
                  {"latent_steps", a.latent_steps},
                  {"summed", a.summed},
                  {"snapshot_cap", a.snapshot_cap},
                  {"resume", a.resume},
                  {"seed", seed},
                  {"out", out}};
    write_resolved_config(dir, "train", resolved);

    std::cout << "train: " << hist.accepted_epochs << " accepted epochs over " << cfg.passes
              << " passes; final test loss "
              << (hist.test_losses.empty() ? "n/a" : format_double(hist.test_losses.back())) << " -> "
              << dir.string() << "\n";
    if (hist.status == TrainStatus::NoAcceptedEpoch)
        std::cout << "warning: budget exhausted without any accepted epoch\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string run;
    std::string data;
    std::string what = "all";
    int probe = 512;
    double alpha = 1.01;
    double dpi_tolerance = 0.1;
    double phase_tolerance = 0.05;
    int eval_traj = 0;
    int pdf_points = 2000;
};

struct SnapshotStore {
    std::vector<LoadedSnapshot> snapshots;  // sorted by epoch
    std::vector<SnapshotRef> refs() const {
        std::vector<SnapshotRef> r;
        for (const auto& s : snapshots) r.push_back({s.epoch, &s.model});
        return r;
    }
};

SnapshotStore load_snapshots(const fs::path& run_dir) {
    SnapshotStore store;
    const fs::path snap_dir = run_dir / "snapshots";
    if (fs::is_directory(snap_dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(snap_dir))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) store.snapshots.push_back(load_snapshot(f));
    }
    if (store.snapshots.empty())
        throw ConfigError("snapshot store is empty in " + run_dir.string() +
                          "; retrain with snapshots enabled before analyzing");
    return store;
}

void write_ip_csvs(const fs::path& dir, const std::vector<InfoPlaneRecord>& records) {
    std::ofstream ip1(dir / "ip1.csv");
    ip1 << "epoch,stack,layer,I_in,I_out\n";
    for (const auto& rec : records) {
        for (const auto& l : rec.encoder)
            ip1 << rec.epoch << ",encoder," << l.layer << ',' << format_double(l.i_input) << ','
                << format_double(l.i_output) << '\n';
        ip1 << rec.epoch << ",bottleneck,0," << format_double(rec.bottleneck.i_input) << ','
            << format_double(rec.bottleneck.i_output) << '\n';
        for (const auto& l : rec.decoder)
            ip1 << rec.epoch << ",decoder," << l.layer << ',' << format_double(l.i_input) << ','
                << format_double(l.i_output) << '\n';
    }
    std::ofstream ip2(dir / "ip2.csv");
    ip2 << "epoch,depth,I_pair,bound_low,bound_high\n";
    for (const auto& rec : records)
        for (std::size_t d = 0; d < rec.ip2.size(); ++d)
            ip2 << rec.epoch << ',' << d + 1 << ',' << format_double(rec.ip2[d]) << ','
                << format_double(rec.h_yhat) << ',' << format_double(rec.i_y_ytilde) << '\n';
}

json dpi_report_json(const InfoPlaneRecord& rec, double tolerance_bits) {
    json violations = json::array();
    for (const auto& v : check_dpi(rec, tolerance_bits))
        violations.push_back({{"chain", v.chain}, {"index", v.index}, {"gap_bits", v.gap_bits}});
    return {{"epoch", rec.epoch}, {"tolerance_bits", tolerance_bits}, {"violations", violations}};
}

json phase_report_json(const std::vector<InfoPlaneRecord>& records, double tolerance_bits) {
    auto curve_report = [&](auto layer_of) {
        json arr = json::array();
        if (records.empty()) return arr;
        const std::size_t n_layers = layer_of(records.front()).size();
        for (std::size_t l = 0; l < n_layers; ++l) {
            std::vector<double> in_curve, out_curve;
            for (const auto& rec : records) {
                in_curve.push_back(layer_of(rec)[l].i_input);
                out_curve.push_back(layer_of(rec)[l].i_output);
            }
            const PhaseResult r = detect_phases(in_curve, out_curve, tolerance_bits);
            arr.push_back({{"layer", static_cast<int>(l) + 1},
                           {"fit_end_epoch", r.fit_end_epoch},
                           {"compression_detected", r.compression_detected},
                           {"indeterminate", r.indeterminate}});
        }
        return arr;
    };
    return {{"tolerance_bits", tolerance_bits},
            {"encoder", curve_report([](const InfoPlaneRecord& r) -> const std::vector<LayerMI>& {
                 return r.encoder;
             })},
            {"decoder", curve_report([](const InfoPlaneRecord& r) -> const std::vector<LayerMI>& {
                 return r.decoder;
             })}};
}

void write_pdf_csv(const fs::path& path, const VariablePdf& pdf) {
    std::ofstream out(path);
    out << "grid,density,space,variable\n";
    for (std::size_t i = 0; i < pdf.grid.size(); ++i)
        out << format_double(pdf.grid[i]) << ',' << format_double(pdf.density(i)) << ',' << pdf.space
            << ',' << pdf.name << '\n';
}

int cmd_analyze(const AnalyzeArgs& a, std::uint64_t seed, const std::string& out) {
    if (a.run.empty() || a.data.empty()) throw ConfigError("analyze: --run and --data are required");
    const bool want_all = a.what == "all";
    auto wants = [&](const std::string& w) { return want_all || a.what == w; };
    if (!want_all && a.what != "mi" && a.what != "dpi" && a.what != "phases" && a.what != "pdf" &&
        a.what != "stiffness" && a.what != "rrmse")
        throw ConfigError("analyze: unknown --what '" + a.what + "'");

    const fs::path dir = prepare_out_dir(out);
    const fs::path run_dir(a.run);
    const Checkpoint ck = load_checkpoint(run_dir / "checkpoint.json");
    const Dataset ds = load_dataset(resolve_manifest(a.data));
    if (ds.dim() != ck.model.n_physical())
        throw ConfigError("dataset width does not match the checkpointed model");
    if (a.eval_traj < 0 || a.eval_traj >= static_cast<int>(ds.trajectories.size()))
        throw ConfigError("eval-traj out of range");
    const std::vector<std::string> var_names =
        ck.var_names.empty() ? dataset_var_names(ds) : ck.var_names;

    MIConfig mi_cfg;
    mi_cfg.alpha = a.alpha;
    mi_cfg.probe_size = a.probe;
    mi_cfg.dpi_tolerance_bits = a.dpi_tolerance;

    if (wants("mi") || wants("dpi") || wants("phases")) {
        const SnapshotStore store = load_snapshots(run_dir);
        const Mat probe = make_probe(ds, a.probe, ds.seed);
        const auto records = compute_info_planes(store.refs(), probe, mi_cfg);
        if (wants("mi")) write_ip_csvs(dir, records);
        if (wants("dpi")) save_json(dir / "dpi_report.json", dpi_report_json(records.back(), a.dpi_tolerance));
        if (wants("phases")) save_json(dir / "phase_report.json", phase_report_json(records, a.phase_tolerance));
    }

    const Trajectory& eval_traj = ds.trajectories[a.eval_traj];

    if (wants("pdf")) {
        const auto grid = uniform_times(eval_traj.times.front(), eval_traj.times.back(), a.pdf_points);
        const Mat phys = ds.norm.normalize_rows(resample_rows_linear(eval_traj.times, eval_traj.states, grid));
        json summary;
        for (int j = 0; j < phys.cols(); ++j) {
            const VariablePdf pdf = variable_pdf(var_names[j], "physical", phys.col(j));
            write_pdf_csv(dir / ("pdf_physical_" + var_names[j] + ".csv"), pdf);
            summary["physical"][var_names[j]] = pdf.gap;
        }
        const Prediction pred = predict_trajectory(ck.model, ck.norm, eval_traj.states.row(0).transpose(),
                                                   grid, ck.config.latent_steps);
        const Mat latents = rescale_columns(pred.latent.states);
        for (int j = 0; j < latents.cols(); ++j) {
            const std::string name = "z" + std::to_string(j + 1);
            const VariablePdf pdf = variable_pdf(name, "latent", latents.col(j));
            write_pdf_csv(dir / ("pdf_latent_" + name + ".csv"), pdf);
            summary["latent"][name] = pdf.gap;
        }
        save_json(dir / "pdf_summary.json", summary);
    }

    if (wants("stiffness")) {
        const StiffSystem sys = system_by_name(ds.system_name);
        const StiffnessReport rep =
            stiffness_report(sys, ck.norm, ck.model, eval_traj, 1024, ck.config.latent_steps);
        save_json(dir / "stiffness_report.json",
                  json{{"physical_stiffness_ratio", rep.physical_stiffness_ratio},
                       {"physical_sharpness", rep.physical_sharpness},
                       {"latent_sharpness", rep.latent_sharpness},
                       {"sharpness_ratio", rep.sharpness_ratio},
                       {"physical_max_stable_dt", rep.physical_max_stable_dt},
                       {"latent_max_stable_dt", rep.latent_max_stable_dt},
                       {"stable_dt_ratio", rep.stable_dt_ratio}});
    }

    if (wants("rrmse")) {
        const RrmseResult r = rollout_rrmse(ck.model, ck.norm, eval_traj, ck.config.latent_steps);
        std::ofstream csv(dir / "rrmse.csv");
        csv << "n_latent";
        for (const auto& n : var_names) csv << ',' << n;
        csv << '\n' << ck.model.n_latent();
        for (int j = 0; j < r.percent.size(); ++j)
            csv << ',' << (r.undefined[j] ? "undefined" : format_double(r.percent(j)));
        csv << '\n';
    }

    json resolved{{"run", a.run},
                  {"data", a.data},
                  {"what", a.what},
                  {"probe", a.probe},
                  {"alpha", a.alpha},
                  {"dpi_tolerance", a.dpi_tolerance},
                  {"phase_tolerance", a.phase_tolerance},
                  {"eval_traj", a.eval_traj},
                  {"pdf_points", a.pdf_points},
                  {"seed", seed},
                  {"out", out}};
    write_resolved_config(dir, "analyze", resolved);
    std::cout << "analyze (" << a.what << ") -> " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// latent-sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string data;
    std::string n_latent_list = "1,2,3,4";
    TrainArgs train;  // width/depth/lr/batch/passes/latent_steps/summed reused
    int probe = 256;
    double alpha = 1.01;
    double dpi_tolerance = 0.1;
    int eval_traj = 0;
};

int cmd_latent_sweep(const SweepArgs& a, std::uint64_t seed, const std::string& out) {
    if (a.data.empty()) throw ConfigError("latent-sweep: --data is required");
    const fs::path dir = prepare_out_dir(out);
    const Dataset ds = load_dataset(resolve_manifest(a.data));
    const std::vector<std::string> var_names = dataset_var_names(ds);
    if (a.eval_traj < 0 || a.eval_traj >= static_cast<int>(ds.trajectories.size()))
        throw ConfigError("eval-traj out of range");

    std::vector<int> nls;
    {
        std::istringstream ss(a.n_latent_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) nls.push_back(static_cast<int>(parse_double(tok)));
        if (nls.empty()) throw ConfigError("latent-sweep: empty --n-latent-list");
    }

    std::ofstream csv(dir / "sweep_summary.csv");
    csv << "n_latent,status,accepted_epochs,final_test_loss,dpi_violations,dpi_1b_violations";
    for (const auto& n : var_names) csv << ",rrmse_" << n;
    csv << '\n';

    MIConfig mi_cfg;
    mi_cfg.alpha = a.alpha;
    mi_cfg.probe_size = a.probe;

    for (int nl : nls) {
        csv << nl;
        try {
            TrainConfig cfg = to_train_config(a.train, seed);
            Rng rng = Rng(seed).fork(2);
            AENodeModel model = build_model({ds.dim(), nl, a.train.width, a.train.depth}, rng);
            const AENodeModel initial = model;
            const TrainHistory hist = train(model, ds, cfg);

            const Mat probe = make_probe(ds, a.probe, ds.seed);
            const std::vector<SnapshotRef> refs{{0, &initial}, {hist.accepted_epochs, &model}};
            const auto records = compute_info_planes(refs, probe, mi_cfg);
            const auto violations = check_dpi(records.back(), a.dpi_tolerance);
            int v1b = 0;
            for (const auto& v : violations) v1b += v.chain == "1b" ? 1 : 0;

            const RrmseResult r =
                rollout_rrmse(model, ds.norm, ds.trajectories[a.eval_traj], cfg.latent_steps);

            csv << ",ok," << hist.accepted_epochs << ','
                << format_double(hist.test_losses.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                          : hist.test_losses.back())
                << ',' << violations.size() << ',' << v1b;
            for (int j = 0; j < r.percent.size(); ++j)
                csv << ',' << (r.undefined[j] ? "undefined" : format_double(r.percent(j)));
            csv << '\n';

            Checkpoint ck;
            ck.model = model;
            ck.norm = ds.norm;
            ck.config = cfg;
            ck.system = ds.system_name;
            ck.var_names = var_names;
            const fs::path sub = dir / ("nl_" + std::to_string(nl));
            fs::create_directories(sub);
            save_checkpoint(sub / "checkpoint.json", ck);
            write_training_log(sub / "training_log.csv", hist);
        } catch (const Error& e) {
            csv << ",failed,,,,";
            for (std::size_t j = 0; j < var_names.size(); ++j) csv << ',';
            csv << '\n';
            std::cerr << "latent-sweep: N_L=" << nl << " failed: " << e.what() << "\n";
        }
    }

    json resolved{{"data", a.data},
                  {"n_latent_list", a.n_latent_list},
                  {"width", a.train.width},
                  {"depth", a.train.depth},
                  {"epsilon", a.train.epsilon},
                  {"lr", a.train.lr},
                  {"batch", a.train.batch},
                  {"passes", a.train.passes},
                  {"latent_steps", a.train.latent_steps},
                  {"probe", a.probe},
                  {"alpha", a.alpha},
                  {"dpi_tolerance", a.dpi_tolerance},
                  {"eval_traj", a.eval_traj},
                  {"seed", seed},
                  {"out", out}};
    write_resolved_config(dir, "latent-sweep", resolved);
    std::cout << "latent-sweep: " << nls.size() << " runs -> " << dir.string() << "\n";
    return 0;
}

void register_train_options(CLI::App* cmd, TrainArgs& t, bool with_model_dims) {
    cmd->add_option("--data", t.data, "dataset manifest (or its directory)");
    if (with_model_dims) cmd->add_option("--n-latent", t.n_latent, "latent dimension N_L");
    cmd->add_option("--width", t.width, "hidden-layer width");
    cmd->add_option("--depth", t.depth, "hidden layers per stack");
    cmd->add_option("--epsilon", t.epsilon, "loss weights e1 e2 e3")->expected(3);
    cmd->add_option("--lr", t.lr, "Adam learning rate");
    cmd->add_option("--batch", t.batch, "batch size");
    cmd->add_option("--passes", t.passes, "training passes over the data");
    cmd->add_option("--latent-steps", t.latent_steps, "RK4 steps per snapshot interval");
    cmd->add_flag("--summed", t.summed, "single summed-gradient update instead of sequential");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"autoencoder + neural-ODE reduced-order modeling of stiff systems\n"
                 "with matrix-based Renyi information-plane instrumentation"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out = "aenode-out";
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    auto* seed_opt = app.add_option("--seed", seed, "global RNG seed");
    auto* out_opt = app.add_option("--out", out, "output directory (must be fresh)");

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "integrate a sweep (or ingest CSVs) into a dataset");
    gen_cmd->add_option("--system", gen.system, "ignition | robertson");
    gen_cmd->add_option("--t-init", gen.t_init, "initial temperature range lo:hi:step [K]");
    gen_cmd->add_option("--phi", gen.phi, "mixture parameter range lo:hi:step");
    gen_cmd->add_option("--t-end", gen.t_end, "integration horizon [s]");
    gen_cmd->add_option("--tol", gen.tol, "reference solver tolerance");
    gen_cmd->add_option("--samples", gen.samples, "uniform snapshots per trajectory");
    gen_cmd->add_option("--densify-threshold", gen.densify_threshold,
                        "max normalized jump between snapshots");
    gen_cmd->add_option("--split", gen.split, "train fraction");
    gen_cmd->add_option("--ingest", gen.ingest, "ingest trajectory CSVs from this file/directory");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train the encoder/NODE/decoder on a dataset");
    register_train_options(train_cmd, tr, true);
    train_cmd->add_option("--snapshot-cap", tr.snapshot_cap, "max retained epoch snapshots");
    train_cmd->add_option("--resume", tr.resume, "checkpoint to resume from");

    AnalyzeArgs an;
    auto* an_cmd = app.add_subcommand("analyze", "emit analysis artifacts from a trained run");
    an_cmd->add_option("--run", an.run, "training output directory");
    an_cmd->add_option("--data", an.data, "dataset manifest (or its directory)");
    an_cmd->add_option("--what", an.what, "mi|dpi|phases|pdf|stiffness|rrmse|all");
    an_cmd->add_option("--probe", an.probe, "probe-set size for MI estimates");
    an_cmd->add_option("--alpha", an.alpha, "Renyi order");
    an_cmd->add_option("--dpi-tolerance", an.dpi_tolerance, "DPI tolerance [bits]");
    an_cmd->add_option("--phase-tolerance", an.phase_tolerance, "compression-detection tolerance [bits]");
    an_cmd->add_option("--eval-traj", an.eval_traj, "trajectory index for pdf/stiffness/rrmse");
    an_cmd->add_option("--pdf-points", an.pdf_points, "uniform resample points for PDFs");

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand("latent-sweep", "train one model per latent dimension");
    sw_cmd->add_option("--n-latent-list", sw.n_latent_list, "comma-separated N_L values");
    register_train_options(sw_cmd, sw.train, false);
    sw.data = "";
    sw_cmd->add_option("--probe", sw.probe, "probe-set size for the DPI check");
    sw_cmd->add_option("--alpha", sw.alpha, "Renyi order");
    sw_cmd->add_option("--dpi-tolerance", sw.dpi_tolerance, "DPI tolerance [bits]");
    sw_cmd->add_option("--eval-traj", sw.eval_traj, "trajectory index for RRMSE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            app.exit(e);
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        json file_cfg;
        if (!config_path.empty()) file_cfg = load_json(config_path);
        backfill(seed_opt, file_cfg, "seed", seed);
        backfill(out_opt, file_cfg, "out", out);

        if (gen_cmd->parsed()) {
            const json sec = file_cfg.value("gen-data", json::object());
            backfill(gen_cmd->get_option("--system"), sec, "system", gen.system);
            backfill(gen_cmd->get_option("--t-init"), sec, "t-init", gen.t_init);
            backfill(gen_cmd->get_option("--phi"), sec, "phi", gen.phi);
            backfill(gen_cmd->get_option("--t-end"), sec, "t-end", gen.t_end);
            backfill(gen_cmd->get_option("--tol"), sec, "tol", gen.tol);
            backfill(gen_cmd->get_option("--samples"), sec, "samples", gen.samples);
            backfill(gen_cmd->get_option("--densify-threshold"), sec, "densify-threshold",
                     gen.densify_threshold);
            backfill(gen_cmd->get_option("--split"), sec, "split", gen.split);
            backfill(gen_cmd->get_option("--ingest"), sec, "ingest", gen.ingest);
            return cmd_gen_data(gen, seed, out);
        }
        if (train_cmd->parsed()) {
            const json sec = file_cfg.value("train", json::object());
            backfill(train_cmd->get_option("--data"), sec, "data", tr.data);
            backfill(train_cmd->get_option("--n-latent"), sec, "n-latent", tr.n_latent);
            backfill(train_cmd->get_option("--width"), sec, "width", tr.width);
            backfill(train_cmd->get_option("--depth"), sec, "depth", tr.depth);
            backfill(train_cmd->get_option("--epsilon"), sec, "epsilon", tr.epsilon);
            backfill(train_cmd->get_option("--lr"), sec, "lr", tr.lr);
            backfill(train_cmd->get_option("--batch"), sec, "batch", tr.batch);
            backfill(train_cmd->get_option("--passes"), sec, "passes", tr.passes);
            backfill(train_cmd->get_option("--latent-steps"), sec, "latent-steps", tr.latent_steps);
            backfill(train_cmd->get_option("--snapshot-cap"), sec, "snapshot-cap", tr.snapshot_cap);
            backfill(train_cmd->get_option("--resume"), sec, "resume", tr.resume);
            if (tr.epsilon.size() != 3) throw ConfigError("--epsilon needs exactly three values");
            return cmd_train(tr, seed, out);
        }
        if (an_cmd->parsed()) {
            const json sec = file_cfg.value("analyze", json::object());
            backfill(an_cmd->get_option("--run"), sec, "run", an.run);
            backfill(an_cmd->get_option("--data"), sec, "data", an.data);
            backfill(an_cmd->get_option("--what"), sec, "what", an.what);
            backfill(an_cmd->get_option("--probe"), sec, "probe", an.probe);
            backfill(an_cmd->get_option("--alpha"), sec, "alpha", an.alpha);
            backfill(an_cmd->get_option("--dpi-tolerance"), sec, "dpi-tolerance", an.dpi_tolerance);
            backfill(an_cmd->get_option("--phase-tolerance"), sec, "phase-tolerance", an.phase_tolerance);
            backfill(an_cmd->get_option("--eval-traj"), sec, "eval-traj", an.eval_traj);
            backfill(an_cmd->get_option("--pdf-points"), sec, "pdf-points", an.pdf_points);
            return cmd_analyze(an, seed, out);
        }
        if (sw_cmd->parsed()) {
            const json sec = file_cfg.value("latent-sweep", json::object());
            backfill(sw_cmd->get_option("--data"), sec, "data", sw.train.data);
            backfill(sw_cmd->get_option("--n-latent-list"), sec, "n-latent-list", sw.n_latent_list);
            backfill(sw_cmd->get_option("--width"), sec, "width", sw.train.width);
            backfill(sw_cmd->get_option("--depth"), sec, "depth", sw.train.depth);
            backfill(sw_cmd->get_option("--epsilon"), sec, "epsilon", sw.train.epsilon);
            backfill(sw_cmd->get_option("--lr"), sec, "lr", sw.train.lr);
            backfill(sw_cmd->get_option("--batch"), sec, "batch", sw.train.batch);
            backfill(sw_cmd->get_option("--passes"), sec, "passes", sw.train.passes);
            backfill(sw_cmd->get_option("--latent-steps"), sec, "latent-steps", sw.train.latent_steps);
            backfill(sw_cmd->get_option("--probe"), sec, "probe", sw.probe);
            backfill(sw_cmd->get_option("--alpha"), sec, "alpha", sw.alpha);
            backfill(sw_cmd->get_option("--dpi-tolerance"), sec, "dpi-tolerance", sw.dpi_tolerance);
            backfill(sw_cmd->get_option("--eval-traj"), sec, "eval-traj", sw.eval_traj);
            sw.data = sw.train.data;
            if (sw.train.epsilon.size() != 3) throw ConfigError("--epsilon needs exactly three values");
            return cmd_latent_sweep(sw, seed, out);
        }
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
