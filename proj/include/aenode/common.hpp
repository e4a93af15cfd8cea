#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <system_error>

namespace aenode {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy. Callers catch the base Error unless they care which
// stage failed.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct IntegrationError : Error {
    double last_valid_time = 0.0;
    long step_index = -1;
    IntegrationError(const std::string& msg, double t_last = 0.0, long step = -1)
        : Error(msg), last_valid_time(t_last), step_index(step) {}
};
struct OptimizerError : Error {
    using Error::Error;
};
struct ParseError : Error {
    long line = -1;
    ParseError(const std::string& msg, long line_no = -1) : Error(msg), line(line_no) {}
};
struct ConfigError : Error {
    using Error::Error;
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Shortest decimal string that round-trips the exact double value.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double x = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto res = std::from_chars(b, e, x);
    if (res.ec != std::errc{}) throw ParseError("not a number: '" + s + "'");
    return x;
}

}  // namespace aenode
