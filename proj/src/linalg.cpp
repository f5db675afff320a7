#include "thinlayer/linalg.hpp"

#include "thinlayer/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace thinlayer {

struct Rng::Impl {
    std::mt19937_64 engine;
};

Rng::Rng(std::uint64_t seed) : impl_(std::make_shared<Impl>(Impl{std::mt19937_64(seed)})) {}

double Rng::uniform() { return static_cast<double>(impl_->engine() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Eigen::VectorXd Rng::vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(-1.0, 1.0);
    return v;
}

struct KktFactorization::Impl {
    Eigen::SimplicialLDLT<SpMat> ldlt;
};

namespace {

double row_sum_norm(const SpMat& K) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(K.rows());
    for (int c = 0; c < K.outerSize(); ++c)
        for (SpMat::InnerIterator it(K, c); it; ++it) s[it.row()] += std::abs(it.value());
    return s.size() ? s.maxCoeff() : 0.0;
}

constexpr double kSolveTol = 1e-10;

}  // namespace

KktFactorization::KktFactorization(const SpMat& K, Eigen::Index constraint_begin)
    : impl_(std::make_shared<Impl>()), K_(K) {
    if (K.rows() != K.cols()) throw Error(ErrorKind::InconsistentMesh, "system matrix is not square");
    const Eigen::Index n = K.rows();
    if (constraint_begin < 0) constraint_begin = n;
    norm_ = row_sum_norm(K);
    K_.makeCompressed();

    double amax = 0;
    const Eigen::VectorXd diag = K_.diagonal();
    for (Eigen::Index i = 0; i < constraint_begin; ++i) amax = std::max(amax, std::abs(diag[i]));
    SpMat shifted = K_;
    if (constraint_begin < n) {
        delta_ = 1e-10 * std::max(amax, 1e-300);
        SpMat D(n, n);
        std::vector<Eigen::Triplet<double>> t;
        for (Eigen::Index i = constraint_begin; i < n; ++i) t.emplace_back(i, i, -delta_);
        D.setFromTriplets(t.begin(), t.end());
        shifted += D;
    }
    impl_->ldlt.compute(shifted);

    Rng rng(12345);
    auto near_null = [&]() {
        Eigen::VectorXd x = rng.vector(n).normalized();
        for (int s = 0; s < 4; ++s) {
            Eigen::VectorXd y = solve_shifted(x);
            const double yn = y.norm();
            if (!std::isfinite(yn) || yn == 0) return Eigen::VectorXd();
            x = y / yn;
        }
        return x;
    };
    if (impl_->ldlt.info() != Eigen::Success) {
        throw SingularSystemError("factorization hit a zero pivot", Eigen::VectorXd());
    }
    // A generic right side is consistent only for a nonsingular matrix.
    double res = 0;
    solve(rng.vector(n), res);
    if (!(res <= 1e-8)) {
        throw SingularSystemError("matrix is numerically singular (refined residual " +
                                      std::to_string(res) + ")",
                                  near_null());
    }
}

Eigen::VectorXd KktFactorization::solve_shifted(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = impl_->ldlt.solve(b);
    return x;
}

Eigen::VectorXd KktFactorization::solve(const Eigen::VectorXd& b, double& rel_residual) const {
    const double bn = b.norm();
    if (bn == 0) {
        rel_residual = 0;
        return Eigen::VectorXd::Zero(b.size());
    }
    Eigen::VectorXd x = solve_shifted(b);
    Eigen::VectorXd r = b - K_ * x;
    rel_residual = r.norm() / bn;
    Eigen::VectorXd best = x;
    double best_res = rel_residual;
    for (int it = 0; it < 30 && rel_residual > 1e-15; ++it) {
        x += solve_shifted(r);
        r = b - K_ * x;
        rel_residual = r.norm() / bn;
        if (!std::isfinite(rel_residual)) break;
        if (rel_residual < best_res) {
            best = x;
            best_res = rel_residual;
        } else if (rel_residual > 0.5 * best_res && best_res < kSolveTol) {
            break;  // stagnated at roundoff level
        }
    }
    rel_residual = best_res;
    return best;
}

Eigen::VectorXd KktFactorization::solve(const Eigen::VectorXd& b) const {
    double r = 0;
    return solve(b, r);
}

namespace {

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& Y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), Y.cols());
}

// Rayleigh-Ritz on span(Y) for P x = lambda Q x; Ritz values ascending.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> rayleigh_ritz(const SpMat& P, const SpMat& Q,
                                                          const Eigen::MatrixXd& Y) {
    const Eigen::MatrixXd Z = orthonormal_columns(Y);
    Eigen::MatrixXd Pr = Z.transpose() * (P * Z);
    Eigen::MatrixXd Qr = Z.transpose() * (Q * Z);
    Pr = 0.5 * (Pr + Pr.transpose()).eval();
    Qr = 0.5 * (Qr + Qr.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Pr, Qr);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::ComputeFailed, "Rayleigh-Ritz failed");
    return {es.eigenvalues(), Z * es.eigenvectors()};
}

bool converged(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int count, double scale) {
    if (a.size() != b.size()) return false;
    for (int i = 0; i < count; ++i)
        if (std::abs(a[i] - b[i]) > 1e-11 * std::max(scale, std::abs(a[i]))) return false;
    return true;
}

}  // namespace

EigenPairs smallest_eigenpairs(const SpMat& A, const SpMat& M, int count, double shift,
                               std::uint64_t seed) {
    const int n = static_cast<int>(A.rows());
    const int block = std::min(n, count + 6);
    SpMat S = A + shift * M;
    Eigen::SimplicialLDLT<SpMat> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::ComputeFailed, "shifted factorization failed");
    Rng rng(seed);
    Eigen::MatrixXd X(n, block);
    for (int j = 0; j < block; ++j) X.col(j) = rng.vector(n);
    EigenPairs out;
    Eigen::VectorXd prev;
    for (int it = 1; it <= 1000; ++it) {
        Eigen::MatrixXd Y = ldlt.solve(M * X);
        auto [vals, vecs] = rayleigh_ritz(A, M, Y);
        X = vecs;
        out.iterations = it;
        if (converged(vals, prev, count, std::abs(shift))) {
            prev = vals;
            break;
        }
        prev = vals;
    }
    out.values = prev.head(count);
    out.vectors = X.leftCols(count);
    return out;
}

EigenPairs largest_eigenpairs(const SpMat& P, const SpMat& Q, int count, std::uint64_t seed) {
    const int n = static_cast<int>(P.rows());
    const int block = std::min(n, count + 6);
    Eigen::SimplicialLDLT<SpMat> ldlt(Q);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::ComputeFailed, "metric factorization failed");
    Rng rng(seed);
    Eigen::MatrixXd X(n, block);
    for (int j = 0; j < block; ++j) X.col(j) = rng.vector(n);
    EigenPairs out;
    Eigen::VectorXd prev;
    for (int it = 1; it <= 1000; ++it) {
        Eigen::MatrixXd Y = ldlt.solve(P * X);
        auto [vals, vecs] = rayleigh_ritz(P, Q, Y);
        Eigen::VectorXd desc = vals.reverse();
        Eigen::MatrixXd dvecs = vecs.rowwise().reverse();
        X = dvecs;
        out.iterations = it;
        const bool done = converged(desc, prev, count, std::abs(desc[0]));
        prev = desc;
        if (done) break;
    }
    out.values = prev.head(count);
    out.vectors = X.leftCols(count);
    return out;
}

}  // namespace thinlayer
