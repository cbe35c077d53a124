#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "shapelab/operator.hpp"

namespace shapelab {

/// Lowest eigenpairs of K u = lambda M u, M-orthonormal.
struct EigenBasis {
    std::vector<double> lambdas;              // ascending
    std::vector<std::vector<double>> vectors; // interior coefficient vectors
    std::vector<double> residuals;            // relative residual per pair
    int iterations = 0;

    std::size_t size() const { return lambdas.size(); }

    /// Maximal runs [first, first + count) of numerically degenerate
    /// eigenvalues (consecutive gap < 1e-6 * lambda).
    std::vector<std::pair<std::size_t, std::size_t>> clusters() const;
};

inline constexpr double kDegeneracyGap = 1e-6;

enum class EigenMethod { automatic, iterative, dense };
enum class InnerSolver { sparse_cholesky, pcg_jacobi };

struct EigenOptions {
    EigenMethod method = EigenMethod::automatic;
    InnerSolver inner = InnerSolver::sparse_cholesky;
    int max_iterations = 1000;
    std::size_t dense_threshold = 400;
    /// Optional starting vectors (e.g. the previous optimizer iterate).
    const std::vector<std::vector<double>>* warm_start = nullptr;
};

/// The k lowest eigenpairs. K must be symmetric positive definite and M
/// diagonal positive. Each pair satisfies
///   ||K u - lambda M u||_{M^-1} <= tol * lambda * ||u||_M.
/// Uses a dense decomposition when n <= dense_threshold in automatic mode.
EigenBasis solve_lowest(const SparseOperator& K, const SparseOperator& M, int k, double tol, std::uint64_t seed,
                        const EigenOptions& opts = {});

/// max_i ||K u_i - lambda_i M u_i||_{M^-1} / (lambda_i ||u_i||_M), recomputed from scratch.
double residual_check(const SparseOperator& K, const SparseOperator& M, const EigenBasis& basis);

/// Relative residual of one pair (same norm as residual_check).
double pair_residual(const SparseOperator& K, const SparseOperator& M, std::span<const double> u, double lambda);

/// Sparse LL^T factorization (fill-reducing ordering) of an SPD operator.
class SparseCholesky {
public:
    explicit SparseCholesky(const SparseOperator& a);
    ~SparseCholesky();
    SparseCholesky(SparseCholesky&&) noexcept;
    SparseCholesky& operator=(SparseCholesky&&) noexcept;

    void solve(std::span<const double> rhs, std::span<double> x) const;
    std::size_t size() const { return n_; }

private:
    struct Impl;
    std::size_t n_;
    std::unique_ptr<Impl> impl_;
};

/// Jacobi-preconditioned conjugate gradients; returns the iteration count.
int pcg_jacobi(const SparseOperator& a, std::span<const double> rhs, std::span<double> x, double rel_tol,
               int max_iterations);

/// Dense symmetric solve of K u = lambda M u for all pairs (M diagonal).
EigenBasis dense_eigenpairs(const SparseOperator& K, const SparseOperator& M, int k);

} // namespace shapelab
