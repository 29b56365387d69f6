#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bimsgc {

// Node-major dense storage: one row per node.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Column-major storage for bases whose columns are vectors (eigenbases, Krylov bases).
using ColMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::int64_t;

// Broad failure categories; the CLI maps them onto exit codes.
enum class ErrorKind { Config, Numeric, Io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Missing or unreadable files.
struct LoadError : Error {
    explicit LoadError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

// Well-formed input that violates a data invariant (labels, symmetry, ranges).
struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

// Out-of-domain argument or configuration value.
struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

// Non-finite values, divergence, or an iterative method that failed to converge.
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

}  // namespace bimsgc
