#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace thinlayer {

enum class ErrorKind {
    MeshingFailed,
    TagAmbiguity,
    EmptyGammaD,
    InconsistentMesh,
    SingularSystem,
    RegimeMismatch,
    DegenerateTensor,
    BogovskiiFailure,
    MeanNotZero,
    ConfigInvalid,
    ComputeFailed,
};

std::string_view to_string(ErrorKind kind);

/// Base error; `kind()` identifies the failure class named in the public contracts.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Raised when a saddle system has a (numerically) nontrivial kernel. When the
/// kernel direction could be recovered it is carried along, in the layout of
/// the unknown vector of the system that failed.
class SingularSystemError : public Error {
public:
    SingularSystemError(const std::string& what, Eigen::VectorXd near_null)
        : Error(ErrorKind::SingularSystem, what), near_null_(std::move(near_null)) {}

    const Eigen::VectorXd& near_null_vector() const noexcept { return near_null_; }
    bool has_near_null_vector() const noexcept { return near_null_.size() > 0; }

private:
    Eigen::VectorXd near_null_;
};

}  // namespace thinlayer
