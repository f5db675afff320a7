#pragma once

// Sparse direct factorization with kernel detection, and small-block
// generalized eigen-solvers used for inequality constants.

#include "thinlayer/fe_space.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>

namespace thinlayer {

/// Reproducible uniform numbers (independent of the standard library's
/// distribution implementations).
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    double uniform();                       // [0,1)
    double uniform(double lo, double hi);
    Eigen::VectorXd vector(Eigen::Index n); // entries in [-1,1)

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

/// Factorization of a symmetric saddle matrix [A B^T; B 0] whose rows from
/// `constraint_begin` on form the (zero) constraint block. That block is shifted
/// by -delta so LDL^T exists without pivoting (quasi-definite); solves are
/// refined against the unshifted matrix. Throws SingularSystemError when the
/// matrix is numerically singular; the near-null vector is in column layout.
class KktFactorization {
public:
    explicit KktFactorization(const SpMat& K, Eigen::Index constraint_begin = -1);
    /// Plain solve with the shifted factors.
    Eigen::VectorXd solve_shifted(const Eigen::VectorXd& b) const;
    /// Refined solve; `rel_residual` receives ||b - K x|| / ||b||.
    Eigen::VectorXd solve(const Eigen::VectorXd& b, double& rel_residual) const;
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    double norm() const { return norm_; }
    double shift() const { return delta_; }

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
    SpMat K_;
    double norm_ = 0;
    double delta_ = 0;
};

struct EigenPairs {
    Eigen::VectorXd values;   // ascending for smallest, descending for largest
    Eigen::MatrixXd vectors;  // columns, M-normalized
    int iterations = 0;
};

/// Smallest eigenpairs of A x = lambda M x (A semi-definite, M definite) by
/// shift-invert block iteration with Rayleigh-Ritz.
EigenPairs smallest_eigenpairs(const SpMat& A, const SpMat& M, int count, double shift,
                               std::uint64_t seed = 7);

/// Largest eigenpairs of P x = lambda Q x (P semi-definite, Q definite).
EigenPairs largest_eigenpairs(const SpMat& P, const SpMat& Q, int count, std::uint64_t seed = 7);

}  // namespace thinlayer
