#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aenode/dataset.hpp"
#include "aenode/io.hpp"

using namespace aenode;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

Trajectory ramp_trajectory(int rows, double slope, double offset) {
    Trajectory t;
    t.system = "ramp";
    t.states.resize(rows, 2);
    for (int i = 0; i < rows; ++i) {
        t.times.push_back(i * 0.1);
        t.states(i, 0) = offset + slope * i;
        t.states(i, 1) = std::sin(0.3 * i) + offset;
    }
    return t;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("aenode_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("paper-shaped sweep: 11 temperatures x 51 mixtures gives 561 trajectories") {
    const auto sweep = ignition_sweep(1000, 2000, 100, 0.5, 1.5, 0.02);
    REQUIRE(sweep.size() == 561);
    const StiffSystem sys = make_ignition_system();
    GenerateOptions opt;
    opt.t_end = 6e-3;
    opt.tol = 1e-6;
    opt.seed = 7;
    opt.snapshot.samples_per_traj = 8;
    const Dataset ds = generate_dataset(sys, sweep, opt);
    CHECK(ds.trajectories.size() == 561);
    CHECK(ds.pairs.size() > 561);  // at least one pair each, densified near fronts
}

TEST_CASE("split: 100 snapshot pairs at 0.8 become 80 train / 20 test, disjoint") {
    std::vector<Trajectory> trajs{ramp_trajectory(51, 0.01, 0.0), ramp_trajectory(51, -0.02, 3.0)};
    const Dataset ds = dataset_from_trajectories(trajs, 0.8, 99);
    REQUIRE(ds.pairs.size() == 100);
    CHECK(ds.train_idx.size() == 80);
    CHECK(ds.test_idx.size() == 20);
    std::vector<bool> seen(100, false);
    for (auto i : ds.train_idx) seen[i] = true;
    for (auto i : ds.test_idx) {
        CHECK(!seen[i]);
        seen[i] = true;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST_CASE("split: same seed shuffles identically, different seed differently") {
    std::vector<Trajectory> trajs{ramp_trajectory(60, 0.02, 0.0)};
    const Dataset a = dataset_from_trajectories(trajs, 0.8, 1234);
    const Dataset b = dataset_from_trajectories(trajs, 0.8, 1234);
    const Dataset c = dataset_from_trajectories(trajs, 0.8, 4321);
    CHECK(a.train_idx == b.train_idx);
    CHECK(a.test_idx == b.test_idx);
    CHECK(a.train_idx != c.train_idx);
}

TEST_CASE("normalization: round trip is machine-precision, values land in [0,1]") {
    std::vector<Trajectory> trajs{ramp_trajectory(40, 0.05, -1.0)};
    const NormInfo norm = NormInfo::fit(trajs);
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
        Vec y(2);
        y << rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 0.5);
        const Vec z = norm.normalize(y);
        const Vec back = norm.denormalize(z);
        CHECK((back - y).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + y.cwiseAbs().maxCoeff()));
    }
    const Mat z = norm.normalize_rows(trajs[0].states);
    CHECK(z.minCoeff() >= 0.0);
    CHECK(z.maxCoeff() <= 1.0);
}

TEST_CASE("normalization: degenerate variable maps to constant 0 and is flagged") {
    Trajectory t;
    t.system = "flat";
    t.times = {0.0, 1.0, 2.0};
    t.states.resize(3, 2);
    t.states.col(0) << 1.0, 2.0, 3.0;
    t.states.col(1).setConstant(7.5);  // inert
    const NormInfo norm = NormInfo::fit({t});
    CHECK(norm.any_degenerate());
    CHECK(norm.degenerate[1] == 1);
    CHECK(norm.degenerate[0] == 0);
    const Mat z = norm.normalize_rows(t.states);
    CHECK(z.col(1).isZero(0.0));
    CHECK(norm.denormalize(z.row(0).transpose())(1) == 7.5);
}

TEST_CASE("generate_dataset is deterministic byte-for-byte") {
    const StiffSystem sys = make_ignition_system();
    GenerateOptions opt;
    opt.t_end = 3e-3;
    opt.tol = 1e-7;
    opt.seed = 11;
    opt.snapshot.samples_per_traj = 12;
    const auto sweep = ignition_sweep(1000, 1100, 50, 0.8, 1.2, 0.2);
    const Dataset a = generate_dataset(sys, sweep, opt);
    const Dataset b = generate_dataset(sys, sweep, opt);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        CHECK(a.trajectories[i].times == b.trajectories[i].times);
        CHECK(a.trajectories[i].states == b.trajectories[i].states);
    }
    CHECK(a.train_idx == b.train_idx);
    CHECK(a.test_idx == b.test_idx);
}

TEST_CASE("snapshot sampling densifies the ignition front") {
    const StiffSystem sys = make_ignition_system();
    const Vec y0 = ignition_initial_state(1000.0, 1.0);
    const Trajectory ref = integrate_reference(sys, y0, 6e-3, 1e-8);
    const NormInfo norm = NormInfo::fit({ref});
    SnapshotOptions opt;
    opt.samples_per_traj = 16;
    const Trajectory snap = snapshot_trajectory(sys, ref, norm, opt);
    CHECK(snap.steps() > 16);  // extra points where the front moves fast
    // between consecutive snapshots no normalized variable jumps far
    // beyond the threshold (refinement depth is finite, so allow slack)
    const Mat z = norm.normalize_rows(snap.states);
    for (long i = 0; i + 1 < snap.steps(); ++i)
        CHECK((z.row(i + 1) - z.row(i)).cwiseAbs().maxCoeff() < 0.05);
    // pair dts are the base interval divided by powers of two
    Dataset ds;
    ds.trajectories = {snap};
    ds.norm = norm;
    ds.rebuild_pairs();
    const double base = 6e-3 / 15;
    for (const auto& p : ds.pairs) {
        const double ratio = base / p.dt;
        CHECK(ratio > 0.99);
        const double log2r = std::log2(ratio);
        CHECK(std::abs(log2r - std::round(log2r)) < 1e-6);
    }
}

TEST_CASE("hermite sampling reproduces smooth dynamics between knots") {
    StiffSystem sys;
    sys.name = "cosine";
    sys.dim = 1;
    sys.var_names = {"y"};
    sys.rhs = [](const Vec&, double t) {
        Vec d(1);
        d << std::cos(t);
        return d;
    };
    Trajectory traj;
    for (int i = 0; i <= 20; ++i) {
        traj.times.push_back(i * 0.1);
    }
    traj.states.resize(21, 1);
    for (int i = 0; i <= 20; ++i) traj.states(i, 0) = std::sin(traj.times[i]);
    for (double t : {0.05, 0.333, 1.111, 1.95}) {
        const Vec y = sample_trajectory(sys, traj, t);
        CHECK(y(0) == Approx(std::sin(t)).margin(1e-6));
    }
}

TEST_CASE("trajectory CSV round-trips bit-identically") {
    const fs::path dir = temp_dir("csv_roundtrip");
    const StiffSystem sys = make_ignition_system();
    Trajectory traj = integrate_reference(sys, ignition_initial_state(1100.0, 0.7), 1e-3, 1e-6);
    traj.meta = {{"T_init", 1100.0}, {"phi", 0.7}};
    const fs::path file = dir / "traj.csv";
    write_trajectory_csv(file, traj);
    const Trajectory back = read_trajectory_csv(file);
    CHECK(back.system == traj.system);
    CHECK(back.times == traj.times);
    CHECK(back.states == traj.states);
    CHECK(back.meta.at("phi") == 0.7);

    // writing the re-read trajectory again yields the same bytes
    const fs::path file2 = dir / "traj2.csv";
    write_trajectory_csv(file2, back);
    std::ifstream a(file), b(file2);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("CSV parse errors carry the offending line") {
    const fs::path dir = temp_dir("csv_errors");

    {
        std::ofstream f(dir / "bad_time.csv");
        f << "# system=x dim=2\n" << "t,y1,y2\n" << "0,1,2\n" << "0.5,1,2\n" << "0.25,1,2\n";
    }
    try {
        read_trajectory_csv(dir / "bad_time.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 5);
        CHECK(std::string(e.what()).find("5") != std::string::npos);
    }

    {
        std::ofstream f(dir / "bad_cols.csv");
        f << "# system=x dim=2\n" << "t,y1,y2\n" << "0,1\n";
    }
    CHECK_THROWS_AS(read_trajectory_csv(dir / "bad_cols.csv"), ParseError);

    {
        std::ofstream f(dir / "bad_cell.csv");
        f << "# system=x dim=2\n" << "t,y1,y2\n" << "0,oops,2\n";
    }
    try {
        read_trajectory_csv(dir / "bad_cell.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }

    {
        std::ofstream f(dir / "no_header.csv");
        f << "t,y1,y2\n" << "0,1,2\n";
    }
    CHECK_THROWS_AS(read_trajectory_csv(dir / "no_header.csv"), ParseError);
}

TEST_CASE("ingest_csv: well-formed two-variable file of 5 rows") {
    const fs::path dir = temp_dir("ingest_single");
    {
        std::ofstream f(dir / "ext.csv");
        f << "# system=external dim=2 run=3\n"
          << "t,y1,y2\n"
          << "0,1,2\n0.1,1.5,2.5\n0.2,2,3\n0.3,2.5,3.5\n0.4,3,4\n";
    }
    const auto trajs = ingest_csv(dir / "ext.csv");
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].dim() == 2);
    CHECK(trajs[0].steps() == 5);
    CHECK(trajs[0].meta.at("run") == 3.0);
}

TEST_CASE("ingest_csv: directory ingest is sorted and complete") {
    const fs::path dir = temp_dir("ingest_dir");
    for (int k = 0; k < 3; ++k) {
        Trajectory t = ramp_trajectory(5 + k, 0.1 * (k + 1), k);
        char name[32];
        std::snprintf(name, sizeof(name), "run_%02d.csv", k);
        write_trajectory_csv(dir / name, t);
    }
    const auto trajs = ingest_csv(dir);
    REQUIRE(trajs.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(trajs[k].steps() == 5 + k);
    CHECK_THROWS_AS(ingest_csv(temp_dir("ingest_empty")), Error);
}
