#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "shapelab/eigensolve.hpp"

namespace shapelab {

/// Starting density presets.
struct Phi0Spec {
    enum class Kind { constant, disk, annulus, two_disks };
    Kind kind = Kind::disk;
    double value = 1.0;    // constant
    Point center{0.5, 0.5};
    double radius = 0.35;  // disk, outer radius of the annulus, first of two disks
    double inner_radius = 0.1;
    Point center2{0.75, 0.5};
    double radius2 = 0.1;
};

/// Nodal density for a preset; zero on the box boundary.
Field make_phi0(const Grid& grid, const Phi0Spec& spec);

struct ObjectiveRecord {
    int iteration = 0;
    double objective = 0.0;
    double eps = 0.0;
};

struct ShapeState {
    Field phi;
    double eps = std::numeric_limits<double>::infinity();
    double Lambda = 0.0;
    int k = 1;
    /// k pairs of the penalized operator at (phi, eps).
    EigenBasis basis;
    /// lambda_{k+1}, used to detect a cluster straddling k (NaN when unavailable).
    double next_lambda = std::numeric_limits<double>::quiet_NaN();
    std::vector<ObjectiveRecord> history;
};

/// The operator family K(phi) = K0 + diag((1/eps)(1 - phi) b h^2) with mass M.
/// eps = +inf turns the penalization off.
class ShapeProblem {
public:
    ShapeProblem(const Grid& grid, const CoefficientField& cf, int k, double Lambda);

    const Grid& grid() const { return grid_; }
    const CoefficientField& coefficients() const { return cf_; }
    int k() const { return k_; }
    double Lambda() const { return Lambda_; }
    const SparseOperator& base_stiffness() const { return k0_; }
    const SparseOperator& mass() const { return m_; }

    SparseOperator stiffness(const Field& phi, double eps) const;
    /// h^2 sum phi.
    double volume(const Field& phi) const;

    /// Fresh state at (phi, eps): phi is clipped to [0, 1] and zeroed on the box boundary.
    ShapeState evaluate(const Field& phi, double eps, double tol, std::uint64_t seed,
                        const EigenBasis* warm = nullptr) const;

private:
    Grid grid_;
    CoefficientField cf_;
    int k_;
    double Lambda_;
    SparseOperator k0_;
    SparseOperator m_;
    std::vector<double> bh2_; // b h^2 per interior unknown
};

/// sum_i lambda_i + Lambda h^2 sum phi. Throws StaleBasis when the stored
/// basis does not satisfy the current operator to 10 tol.
double objective(const ShapeProblem& problem, const ShapeState& state, double tol = 1e-8);

/// Derivative of the objective in each nodal phi_j (zero on the box boundary).
Field objective_gradient(const ShapeProblem& problem, const ShapeState& state);

struct OptimizerOptions {
    int k = 1;
    double Lambda = 0.0;
    double eps0 = 0.0;      // <= 0: 1 / lambda_1(D)
    double eps_min = 0.0;   // <= 0: h^2
    double eps_factor = 0.5;
    Phi0Spec phi0;
    double tol = 1e-6;      // per-phase relative objective change
    int max_iters = 200;    // per phase
    double step0 = 1.0;     // largest nodal change of the first trial step
    double eig_tol = 1e-8;
    std::uint64_t seed = 1;
    /// Rounds of exact-objective interface exchange after the last phase (0 disables).
    int polish_rounds = 100;
};

/// Projected gradient descent with backtracking and geometric continuation in eps.
ShapeState optimize(const Grid& grid, const CoefficientField& cf, const OptimizerOptions& opts);

struct ComponentMap {
    Field chi;
    std::vector<int> labels; // per node, -1 outside {chi = 1}
    int count = 0;
    std::vector<std::size_t> sizes;
    /// Share of sum_i int u_i^2 b carried by each component (filled by attach_eigen_content).
    std::vector<double> eigen_content;
    bool too_many_components = false;
    /// Some pair of one-cell dilations of distinct components meets strictly inside D.
    bool interior_contact = false;
};

ComponentMap threshold_components(const Field& phi, double level, int k = 1);

void attach_eigen_content(ComponentMap& map, const EigenBasis& basis, const SparseOperator& mass);

} // namespace shapelab
