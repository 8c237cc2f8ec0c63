#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <stdexcept>
#include <string>

namespace imm {

// Rows are samples, columns are coordinates.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Invalid arguments or configuration (maps to CLI exit code 1).
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Faults during an otherwise valid run: NaN loss, I/O failure (CLI exit code 2).
struct RuntimeFault : std::runtime_error {
    explicit RuntimeFault(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DomainError(msg);
}

// Shortest round-trip decimal form; the one formatting used in every text
// artifact (metrics log, configs, reports) so identical runs emit identical
// bytes.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace imm
