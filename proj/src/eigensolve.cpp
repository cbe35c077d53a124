#include "shapelab/eigensolve.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

namespace shapelab {

std::vector<std::pair<std::size_t, std::size_t>> EigenBasis::clusters() const
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= lambdas.size(); ++i) {
        if (i == lambdas.size() || lambdas[i] - lambdas[i - 1] >= kDegeneracyGap * std::abs(lambdas[i])) {
            out.emplace_back(start, i - start);
            start = i;
        }
    }
    return out;
}

namespace {

double m_dot(std::span<const double> m, std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += m[i] * a[i] * b[i];
    return s;
}

std::vector<double> diagonal_of_mass(const SparseOperator& M)
{
    if (M.nonzeros() != M.size()) throw Error(ErrorCode::BadParams, "mass operator must be diagonal");
    auto d = M.diagonal();
    for (double v : d) {
        if (!(v > 0.0)) throw Error(ErrorCode::BadParams, "mass operator must be positive");
    }
    return d;
}

void check_symmetric(const SparseOperator& K)
{
    if (K.asymmetry() > 1e-12 * K.max_abs()) throw Error(ErrorCode::BadK, "stiffness operator is not symmetric");
}

// First eigenvector gets a nonnegative M-weighted sum; the others are fixed
// the same way (or by their largest entry when the sum vanishes) so that
// repeated solves are reproducible.
void normalize_signs(EigenBasis& basis, std::span<const double> m)
{
    for (auto& u : basis.vectors) {
        double s = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            s += m[i] * u[i];
            scale += m[i] * std::abs(u[i]);
        }
        bool flip = s < 0.0;
        if (std::abs(s) <= 1e-10 * scale) {
            std::size_t arg = 0;
            for (std::size_t i = 1; i < u.size(); ++i) {
                if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
            }
            flip = u[arg] < 0.0;
        }
        if (flip) {
            for (double& v : u) v = -v;
        }
    }
}

} // namespace

double pair_residual(const SparseOperator& K, const SparseOperator& M, std::span<const double> u, double lambda)
{
    if (u.size() != K.size() || M.size() != K.size()) throw Error(ErrorCode::DimensionMismatch, "residual sizes");
    const auto m = M.diagonal();
    const auto ku = K.apply(u);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double r = ku[i] - lambda * m[i] * u[i];
        num += r * r / m[i];
        den += m[i] * u[i] * u[i];
    }
    return std::sqrt(num) / (std::abs(lambda) * std::sqrt(den));
}

double residual_check(const SparseOperator& K, const SparseOperator& M, const EigenBasis& basis)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        worst = std::max(worst, pair_residual(K, M, basis.vectors[i], basis.lambdas[i]));
    }
    return worst;
}

struct SparseCholesky::Impl {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
};

SparseCholesky::SparseCholesky(const SparseOperator& a) : n_(a.size()), impl_(std::make_unique<Impl>())
{
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(a.nonzeros());
    const auto rp = a.row_ptr();
    const auto cs = a.cols();
    const auto vs = a.vals();
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
            if (cs[p] <= i) {
                trips.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cs[p]), vs[p]);
            }
        }
    }
    const auto ne = static_cast<Eigen::Index>(n_);
    Eigen::SparseMatrix<double> mat(ne, ne);
    mat.setFromTriplets(trips.begin(), trips.end());
    impl_->llt.compute(mat);
    if (impl_->llt.info() != Eigen::Success) throw Error(ErrorCode::BadK, "operator is not positive definite");
}

SparseCholesky::~SparseCholesky() = default;
SparseCholesky::SparseCholesky(SparseCholesky&&) noexcept = default;
SparseCholesky& SparseCholesky::operator=(SparseCholesky&&) noexcept = default;

void SparseCholesky::solve(std::span<const double> rhs, std::span<double> x) const
{
    const auto ne = static_cast<Eigen::Index>(n_);
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), ne);
    Eigen::Map<Eigen::VectorXd> out(x.data(), ne);
    out = impl_->llt.solve(b);
}

int pcg_jacobi(const SparseOperator& a, std::span<const double> rhs, std::span<double> x, double rel_tol,
               int max_iterations)
{
    const std::size_t n = a.size();
    const auto d = a.diagonal();
    std::vector<double> r(n), z(n), p(n), q(n);
    a.apply(x, q);
    double bnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = rhs[i] - q[i];
        bnorm += rhs[i] * rhs[i];
    }
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return 0;
    }
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = r[i] / d[i];
        p[i] = z[i];
        rz += r[i] * z[i];
    }
    for (int it = 1; it <= max_iterations; ++it) {
        a.apply(p, q);
        double pq = 0.0;
        for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
        const double alpha = rz / pq;
        double rr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            rr += r[i] * r[i];
        }
        if (std::sqrt(rr) <= rel_tol * bnorm) return it;
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = r[i] / d[i];
            rz_new += r[i] * z[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw Error(ErrorCode::NoConvergence, "conjugate gradients did not converge");
}

EigenBasis dense_eigenpairs(const SparseOperator& K, const SparseOperator& M, int k)
{
    const std::size_t n = K.size();
    const auto m = diagonal_of_mass(M);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const auto rp = K.row_ptr();
    const auto cs = K.cols();
    const auto vs = K.vals();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cs[p])) =
                vs[p] / std::sqrt(m[i] * m[cs[p]]);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense eigensolver failed");

    EigenBasis out;
    out.iterations = 1;
    for (int j = 0; j < k; ++j) {
        out.lambdas.push_back(es.eigenvalues()(j));
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), j) / std::sqrt(m[i]);
        }
        out.vectors.push_back(std::move(u));
    }
    normalize_signs(out, m);
    for (int j = 0; j < k; ++j) {
        out.residuals.push_back(pair_residual(K, M, out.vectors[static_cast<std::size_t>(j)],
                                              out.lambdas[static_cast<std::size_t>(j)]));
    }
    return out;
}

namespace {

EigenBasis subspace_iteration(const SparseOperator& K, const SparseOperator& M, int k, double tol,
                              std::uint64_t seed, const EigenOptions& opts)
{
    const std::size_t n = K.size();
    const auto m = diagonal_of_mass(M);
    const std::size_t ku = static_cast<std::size_t>(k);
    const std::size_t p = std::min(n, std::max(2 * ku, ku + 4));

    std::vector<std::vector<double>> x(p, std::vector<double>(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        const bool warm = opts.warm_start != nullptr && j < opts.warm_start->size()
                       && (*opts.warm_start)[j].size() == n;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = dist(rng);
            x[j][i] = warm ? (*opts.warm_start)[j][i] : r;
        }
    }

    std::unique_ptr<SparseCholesky> chol;
    if (opts.inner == InnerSolver::sparse_cholesky) chol = std::make_unique<SparseCholesky>(K);
    const double inner_tol = std::clamp(tol * 1e-2, 1e-14, 1e-6);

    std::vector<bool> locked(p, false);
    std::vector<std::vector<double>> y(p, std::vector<double>(n));
    std::vector<std::vector<double>> ky(p, std::vector<double>(n));
    std::vector<double> rhs(n);
    std::vector<double> lambdas(p);
    std::vector<double> res(ku, 0.0);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        for (std::size_t j = 0; j < p; ++j) {
            if (locked[j] && it > 1) {
                y[j] = x[j];
                continue;
            }
            for (std::size_t i = 0; i < n; ++i) rhs[i] = m[i] * x[j][i];
            if (chol) {
                chol->solve(rhs, y[j]);
            } else {
                y[j] = x[j];
                if (lambdas[j] > 0.0) {
                    for (double& v : y[j]) v /= lambdas[j];
                }
                pcg_jacobi(K, rhs, y[j], inner_tol, 20 * static_cast<int>(n) + 100);
            }
        }

        // Rayleigh-Ritz on span(Y).
        const auto pe = static_cast<Eigen::Index>(p);
        Eigen::MatrixXd kr(pe, pe), mr(pe, pe);
        for (std::size_t a = 0; a < p; ++a) K.apply(y[a], ky[a]);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                double sk = 0.0;
                for (std::size_t i = 0; i < n; ++i) sk += y[a][i] * ky[b][i];
                const double sm = m_dot(m, y[a], y[b]);
                const auto ai = static_cast<Eigen::Index>(a);
                const auto bi = static_cast<Eigen::Index>(b);
                kr(ai, bi) = kr(bi, ai) = sk;
                mr(ai, bi) = mr(bi, ai) = sm;
            }
        }
        // Scale to unit M-norm for conditioning of the projected pencil.
        Eigen::VectorXd s(pe);
        for (Eigen::Index a = 0; a < pe; ++a) s(a) = 1.0 / std::sqrt(mr(a, a));
        kr = s.asDiagonal() * kr * s.asDiagonal();
        mr = s.asDiagonal() * mr * s.asDiagonal();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(kr, mr);
        if (ges.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "Rayleigh-Ritz step failed");
        const Eigen::MatrixXd q = s.asDiagonal() * ges.eigenvectors();

        for (std::size_t j = 0; j < p; ++j) {
            std::fill(x[j].begin(), x[j].end(), 0.0);
            for (std::size_t a = 0; a < p; ++a) {
                const double c = q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
                for (std::size_t i = 0; i < n; ++i) x[j][i] += c * y[a][i];
            }
            lambdas[j] = ges.eigenvalues()(static_cast<Eigen::Index>(j));
        }

        double worst = 0.0;
        bool prefix = true;
        for (std::size_t j = 0; j < ku; ++j) {
            res[j] = pair_residual(K, M, x[j], lambdas[j]);
            worst = std::max(worst, res[j]);
            // Lock a converged leading prefix; later vectors keep iterating.
            prefix = prefix && res[j] <= 1e-2 * tol;
            locked[j] = prefix;
        }
        if (worst <= tol) {
            EigenBasis out;
            out.iterations = it;
            for (std::size_t j = 0; j < ku; ++j) {
                out.lambdas.push_back(lambdas[j]);
                out.vectors.push_back(std::move(x[j]));
            }
            normalize_signs(out, m);
            for (std::size_t j = 0; j < ku; ++j) out.residuals.push_back(res[j]);
            return out;
        }
    }
    throw Error(ErrorCode::NoConvergence, "subspace iteration exceeded its iteration budget");
}

} // namespace

EigenBasis solve_lowest(const SparseOperator& K, const SparseOperator& M, int k, double tol, std::uint64_t seed,
                        const EigenOptions& opts)
{
    if (K.size() != M.size()) throw Error(ErrorCode::DimensionMismatch, "K and M sizes differ");
    const std::size_t n = K.size();
    if (k < 1 || static_cast<std::size_t>(k) * 4 > n) {
        throw Error(ErrorCode::BadParams, "need 1 <= k <= n/4");
    }
    check_symmetric(K);
    const bool dense = opts.method == EigenMethod::dense
                    || (opts.method == EigenMethod::automatic && n <= opts.dense_threshold);
    if (dense) return dense_eigenpairs(K, M, k);
    return subspace_iteration(K, M, k, tol, seed, opts);
}

} // namespace shapelab
