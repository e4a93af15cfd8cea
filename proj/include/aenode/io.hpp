#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aenode/common.hpp"
#include "aenode/dynsys.hpp"

namespace aenode {

// Trajectory CSV format:
//   # system=<name> dim=<d> <key>=<value>...
//   t,y1,...,yd
//   <numeric rows, full-precision decimal, time in seconds>

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for write: " + path.string());
    out << "# system=" << (traj.system.empty() ? "unknown" : traj.system) << " dim=" << traj.dim();
    for (const auto& [k, v] : traj.meta) out << ' ' << k << '=' << format_double(v);
    out << '\n';
    out << 't';
    for (int j = 1; j <= traj.dim(); ++j) out << ",y" << j;
    out << '\n';
    for (long i = 0; i < traj.steps(); ++i) {
        out << format_double(traj.times[i]);
        for (int j = 0; j < traj.dim(); ++j) out << ',' << format_double(traj.states(i, j));
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

}  // namespace detail

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path.string());
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 1);
    ++line_no;
    if (line.rfind("# ", 0) != 0) throw ParseError(path.string() + ": missing '# system=...' header", line_no);

    Trajectory traj;
    int dim = -1;
    {
        std::istringstream hs(line.substr(2));
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos)
                throw ParseError(path.string() + ": malformed header token '" + tok + "'", line_no);
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "system")
                traj.system = val;
            else if (key == "dim")
                dim = static_cast<int>(parse_double(val));
            else
                traj.meta[key] = parse_double(val);
        }
    }
    if (dim < 1) throw ParseError(path.string() + ": header lacks a valid dim", line_no);

    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing column row", line_no + 1);
    ++line_no;
    {
        const auto cols = detail::split_csv_line(line);
        if (static_cast<int>(cols.size()) != dim + 1 || cols[0] != "t")
            throw ParseError(path.string() + ": column row must be t,y1,...,y" + std::to_string(dim),
                             line_no);
    }

    std::vector<double> times;
    std::vector<Vec> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != dim + 1)
            throw ParseError(path.string() + ": expected " + std::to_string(dim + 1) + " columns, got " +
                                 std::to_string(cells.size()),
                             line_no);
        double t;
        Vec y(dim);
        try {
            t = parse_double(cells[0]);
            for (int j = 0; j < dim; ++j) y(j) = parse_double(cells[j + 1]);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (!times.empty() && t <= times.back())
            throw ParseError(path.string() + ": time not strictly increasing at row " +
                                 std::to_string(line_no),
                             line_no);
        if (!all_finite(y) || !std::isfinite(t))
            throw ParseError(path.string() + ": non-finite value at row " + std::to_string(line_no), line_no);
        times.push_back(t);
        rows.push_back(std::move(y));
    }
    if (times.empty()) throw ParseError(path.string() + ": no data rows", line_no);

    traj.times = std::move(times);
    traj.states.resize(traj.times.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) traj.states.row(i) = rows[i].transpose();
    return traj;
}

/// Ingest externally generated trajectories: a single CSV file or every
/// *.csv in a directory (sorted by name).
inline std::vector<Trajectory> ingest_csv(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::vector<Trajectory> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error("no .csv files in " + path.string());
        for (const auto& f : files) out.push_back(read_trajectory_csv(f));
    } else {
        out.push_back(read_trajectory_csv(path));
    }
    return out;
}

}  // namespace aenode
