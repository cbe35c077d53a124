#include "shapelab/operator.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace shapelab {

SparseOperator::SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                               std::vector<double> vals)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals))
{
    if (row_ptr_.size() != n_ + 1 || cols_.size() != vals_.size() || row_ptr_.back() != vals_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "inconsistent compressed-row arrays");
    }
}

double SparseOperator::entry(std::size_t i, std::size_t j) const
{
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseOperator::diagonal() const
{
    std::vector<double> d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) d[i] = entry(i, i);
    return d;
}

double SparseOperator::max_abs() const
{
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
}

double SparseOperator::asymmetry() const
{
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            const std::size_t j = cols_[p];
            if (j <= i) continue;
            worst = std::max(worst, std::abs(vals_[p] - entry(j, i)));
        }
    }
    return worst;
}

std::size_t SparseOperator::bandwidth() const
{
    std::size_t bw = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        if (row_ptr_[i] == row_ptr_[i + 1]) continue;
        bw = std::max(bw, i - std::min(i, cols_[row_ptr_[i]]));
    }
    return bw;
}

SparseOperator SparseOperator::with_diagonal_shift(std::span<const double> shift) const
{
    if (shift.size() != n_) throw Error(ErrorCode::DimensionMismatch, "diagonal shift length");
    SparseOperator out = *this;
    for (std::size_t i = 0; i < n_; ++i) {
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        const auto it = std::lower_bound(first, last, i);
        if (it == last || *it != i) throw Error(ErrorCode::DimensionMismatch, "missing diagonal entry");
        out.vals_[static_cast<std::size_t>(it - cols_.begin())] += shift[i];
    }
    return out;
}

SparseOperator SparseOperator::restrict_to(const std::vector<bool>& keep) const
{
    if (keep.size() != n_) throw Error(ErrorCode::DimensionMismatch, "restriction mask length");
    std::vector<std::size_t> renumber(n_, n_);
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        if (keep[i]) renumber[i] = m++;
    }
    std::vector<std::size_t> rp{0};
    std::vector<std::size_t> cs;
    std::vector<double> vs;
    for (std::size_t i = 0; i < n_; ++i) {
        if (!keep[i]) continue;
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            if (!keep[cols_[p]]) continue;
            cs.push_back(renumber[cols_[p]]);
            vs.push_back(vals_[p]);
        }
        rp.push_back(cs.size());
    }
    return SparseOperator(m, std::move(rp), std::move(cs), std::move(vs));
}

SparseOperator SparseOperator::diagonal_matrix(std::span<const double> d)
{
    std::vector<std::size_t> rp(d.size() + 1);
    std::vector<std::size_t> cs(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        rp[i + 1] = i + 1;
        cs[i] = i;
    }
    return SparseOperator(d.size(), std::move(rp), std::move(cs), std::vector<double>(d.begin(), d.end()));
}

namespace {

// Local node order on a cell: 0:(0,0) 1:(1,0) 2:(1,1) 3:(0,1).
constexpr std::array<int, 4> kDx = {0, 1, 1, 0};
constexpr std::array<int, 4> kDy = {0, 0, 1, 1};

using ElementMatrix = std::array<std::array<double, 4>, 4>;

// Exact Q1 element matrix of int A grad phi_a . grad phi_b over a square cell
// with constant A. The h-scaling cancels in two dimensions.
ElementMatrix element_stiffness(const Sym2& a)
{
    ElementMatrix ke{};
    const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double y : gp) {
        for (double x : gp) {
            const double dphi_dx[4] = {-(1 - y), (1 - y), y, -y};
            const double dphi_dy[4] = {-(1 - x), -x, x, (1 - x)};
            for (int p = 0; p < 4; ++p) {
                const double fx = a.a11 * dphi_dx[p] + a.a12 * dphi_dy[p];
                const double fy = a.a12 * dphi_dx[p] + a.a22 * dphi_dy[p];
                for (int q = 0; q < 4; ++q) {
                    ke[p][q] += 0.25 * (fx * dphi_dx[q] + fy * dphi_dy[q]);
                }
            }
        }
    }
    return ke;
}

// Position of neighbor offset (dx, dy) in the 9-point row layout.
constexpr int slot(int dx, int dy) { return (dy + 1) * 3 + (dx + 1); }

} // namespace

SparseOperator assemble_stiffness(const Grid& grid, const CoefficientField& cf, const Field* potential)
{
    const std::size_t n = grid.interior_count();
    const int nx = grid.nx();
    const int ny = grid.ny();

    // Dense 9-point accumulation per interior row, compressed afterwards.
    std::vector<std::array<double, 9>> rows(n);
    for (auto& r : rows) r.fill(0.0);

    const auto a11 = cf.a11.component(0);
    const auto a12 = cf.a12.component(0);
    const auto a22 = cf.a22.component(0);
    for (int cj = 0; cj < ny; ++cj) {
        for (int ci = 0; ci < nx; ++ci) {
            double s11 = 0.0, s12 = 0.0, s22 = 0.0;
            for (int l = 0; l < 4; ++l) {
                const std::size_t node = grid.node(ci + kDx[l], cj + kDy[l]);
                s11 += a11[node];
                s12 += a12[node];
                s22 += a22[node];
            }
            const ElementMatrix ke = element_stiffness({0.25 * s11, 0.25 * s12, 0.25 * s22});
            for (int p = 0; p < 4; ++p) {
                const int ip = ci + kDx[p];
                const int jp = cj + kDy[p];
                if (grid.on_boundary(ip, jp)) continue;
                auto& row = rows[grid.interior(ip, jp)];
                for (int q = 0; q < 4; ++q) {
                    row[slot(kDx[q] - kDx[p], kDy[q] - kDy[p])] += ke[p][q];
                }
            }
        }
    }

    const double h2 = grid.h() * grid.h();
    if (potential != nullptr) {
        const auto v = potential->component(0);
        for (int j = 1; j < ny; ++j) {
            for (int i = 1; i < nx; ++i) {
                const double vi = v[grid.node(i, j)];
                if (vi < 0.0) throw Error(ErrorCode::NegativePotential, "potential must be nonnegative");
                rows[grid.interior(i, j)][slot(0, 0)] += vi * h2;
            }
        }
    }

    std::vector<std::size_t> rp{0};
    std::vector<std::size_t> cs;
    std::vector<double> vs;
    rp.reserve(n + 1);
    cs.reserve(9 * n);
    vs.reserve(9 * n);
    for (int j = 1; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) {
            const auto& row = rows[grid.interior(i, j)];
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (grid.on_boundary(i + dx, j + dy)) continue;
                    cs.push_back(grid.interior(i + dx, j + dy));
                    vs.push_back(row[slot(dx, dy)]);
                }
            }
            rp.push_back(cs.size());
        }
    }
    return SparseOperator(n, std::move(rp), std::move(cs), std::move(vs));
}

SparseOperator assemble_mass(const Grid& grid, const CoefficientField& cf)
{
    const double h2 = grid.h() * grid.h();
    const auto b = cf.b.component(0);
    std::vector<double> d(grid.interior_count());
    for (int j = 1; j < grid.ny(); ++j) {
        for (int i = 1; i < grid.nx(); ++i) d[grid.interior(i, j)] = b[grid.node(i, j)] * h2;
    }
    return SparseOperator::diagonal_matrix(d);
}

void SparseOperator::apply(std::span<const double> v, std::span<double> y) const
{
    if (v.size() != n_ || y.size() != n_) {
        throw Error(ErrorCode::DimensionMismatch, "operator/vector length mismatch");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += vals_[p] * v[cols_[p]];
        y[i] = s;
    }
}

std::vector<double> SparseOperator::apply(std::span<const double> v) const
{
    std::vector<double> y(n_);
    apply(v, y);
    return y;
}

std::vector<double> to_interior(const Grid& grid, std::span<const double> nodal)
{
    if (nodal.size() != grid.node_count()) throw Error(ErrorCode::DimensionMismatch, "nodal vector length");
    std::vector<double> out(grid.interior_count());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = nodal[grid.node_of_interior(k)];
    return out;
}

std::vector<double> to_nodal(const Grid& grid, std::span<const double> interior)
{
    if (interior.size() != grid.interior_count()) {
        throw Error(ErrorCode::DimensionMismatch, "interior vector length");
    }
    std::vector<double> out(grid.node_count(), 0.0);
    for (std::size_t k = 0; k < interior.size(); ++k) out[grid.node_of_interior(k)] = interior[k];
    return out;
}

} // namespace shapelab
