#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "dcflow/fem.hpp"
#include "dcflow/model.hpp"

namespace dcflow {

/// Periodic n x n mesh of the unit cell Y = [0,1]^2.
///
/// Nodes on opposite edges share one unknown, so unknown (i, j) sits at node
/// (i, j) for 0 <= i, j < n. Periodic Q1 functions are stored by unknown.
class UnitCellMesh {
public:
    explicit UnitCellMesh(int n);

    int n() const { return n_; }
    const StructuredGrid& grid() const { return grid_; }
    const DofMap& dofs() const { return dofs_; }
    int num_dofs() const { return dofs_.num_dofs; }
    Point dof_point(int d) const;

    /// Integral over Y.
    double mean(const Vector& u) const;
    Vector remove_mean(const Vector& u) const;
    /// Values at all (n+1)^2 grid nodes.
    Vector nodal(const Vector& u) const;
    /// || grad u ||_{L2(Y)}.
    double gradient_norm(const Vector& u) const;

    QuadField sample(const std::function<double(Point)>& f, int order = 3) const;

private:
    int n_ = 0;
    StructuredGrid grid_;
    DofMap dofs_;
    SparseMatrix laplace_;
};

/// Solves the singular periodic system A u = rhs with one unknown pinned to 0,
/// then shifts u to zero mean. A must have constants as its only kernel.
Vector solve_periodic(const UnitCellMesh& mesh, const SparseMatrix& a, const Vector& rhs);

/// Right side -int k e^i . grad phi of the N problem, direction 0 or 1.
Vector cell_n_rhs(const UnitCellMesh& mesh, const QuadField& k, int direction);

/// int k grad N . grad phi = -int k e^i . grad phi, mean zero.
Vector solve_cell_N(const UnitCellMesh& mesh, const QuadField& k, int direction);

enum class MeanPolicy {
    Reject,    ///< nonzero-mean Q is an invalid argument
    Subtract,  ///< the cell average of Q is removed first
};

/// Largest |int_Y Q| accepted by MeanPolicy::Reject, relative to max(1, max|Q|).
inline constexpr double kMeanTolerance = 1e-12;

/// Load int Q psi of the M problem after the mean check of `policy`.
Vector cell_m_rhs(const UnitCellMesh& mesh, const QuadField& q, MeanPolicy policy = MeanPolicy::Reject);

/// int k grad M . grad psi = int Q psi, mean zero.
Vector solve_cell_M(const UnitCellMesh& mesh, const QuadField& k, const QuadField& q,
                    MeanPolicy policy = MeanPolicy::Reject);

struct EffectiveTensor {
    Eigen::Matrix2d value;  ///< symmetrized
    double asymmetry = 0.0;  ///< |K12 - K21| / max|K_ij| before symmetrizing
};

/// K*_ij = int k (delta_ij + dN^j / dy_i).
EffectiveTensor effective_tensor(const UnitCellMesh& mesh, const QuadField& k, const Vector& n1, const Vector& n2);

/// The four cell problems of one macro point.
struct CellSolutions {
    double p1 = 0.0;
    double p2 = 0.0;
    std::array<std::array<Vector, 2>, 2> n;  ///< [direction][continuum]
    std::array<Vector, 2> m;                 ///< [continuum]
};

CellSolutions solve_cell_problems(const UnitCellMesh& mesh, const CellModel& model, double p1, double p2,
                                  MeanPolicy policy = MeanPolicy::Reject, int order = 3);

/// Coefficients of the homogenized system at one macro point, written as
///   dp_j/dt - div(K*_j grad p_j) - div(G_j (p_o - p_j)) + sum_m b*_jm . grad p_m + c*_j (p_j - p_o) = f_j
/// where o is the other continuum.
struct EffectiveCoefficients {
    double p1 = 0.0;
    double p2 = 0.0;
    std::array<EffectiveTensor, 2> k;
    std::array<std::array<Eigen::Vector2d, 2>, 2> b;  ///< [j][m]
    std::array<double, 2> c{};
    std::array<Eigen::Vector2d, 2> g;  ///< int k_j grad M_j
};

EffectiveCoefficients homogenized_coefficients(const UnitCellMesh& mesh, const CellModel& model,
                                               const CellSolutions& cells, int order = 3);

/// Cell problems and coefficients on the tensor grid of macro points, in
/// row-major order over (p1, p2).
std::vector<EffectiveCoefficients> effective_table(const UnitCellMesh& mesh, const CellModel& model,
                                                   const std::vector<double>& p1, const std::vector<double>& p2,
                                                   MeanPolicy policy = MeanPolicy::Reject);

/// JSON array with one object per macro point.
void write_effective_table(std::ostream& out, const std::vector<EffectiveCoefficients>& table);

}  // namespace dcflow
