#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shapelab/coeffs.hpp"
#include "shapelab/grid.hpp"

namespace shapelab {

/// Square sparse matrix in compressed-row layout, columns sorted per row.
class SparseOperator {
public:
    SparseOperator() = default;
    SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                   std::vector<double> vals);

    std::size_t size() const { return n_; }
    std::size_t nonzeros() const { return vals_.size(); }
    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::size_t> cols() const { return cols_; }
    std::span<const double> vals() const { return vals_; }

    /// Entry (i, j), zero when outside the pattern.
    double entry(std::size_t i, std::size_t j) const;
    std::vector<double> diagonal() const;
    double max_abs() const;
    /// max |K_ij - K_ji| over the pattern.
    double asymmetry() const;
    /// Lower half-bandwidth max |i - j| over the pattern.
    std::size_t bandwidth() const;

    /// Same pattern with `shift[i]` added to the diagonal.
    SparseOperator with_diagonal_shift(std::span<const double> shift) const;
    /// Principal submatrix on the indices with keep[i] true, renumbered in order.
    SparseOperator restrict_to(const std::vector<bool>& keep) const;

    static SparseOperator diagonal_matrix(std::span<const double> d);

    /// y = op * v.
    std::vector<double> apply(std::span<const double> v) const;
    void apply(std::span<const double> v, std::span<double> y) const;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

/// Q1 stiffness form int A grad u . grad v with A frozen at each cell center,
/// plus the lumped potential V(x_i) h^2 on the diagonal. Dirichlet nodes on
/// the box boundary are eliminated; rows follow Grid::interior numbering.
SparseOperator assemble_stiffness(const Grid& grid, const CoefficientField& cf, const Field* potential = nullptr);

/// Lumped b-weighted mass: M_ii = b(x_i) h^2.
SparseOperator assemble_mass(const Grid& grid, const CoefficientField& cf);

/// Restriction of a nodal scalar field to interior unknowns, and back (boundary = 0).
std::vector<double> to_interior(const Grid& grid, std::span<const double> nodal);
std::vector<double> to_nodal(const Grid& grid, std::span<const double> interior);

} // namespace shapelab
