#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dcflow/grid.hpp"

namespace dcflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Tensor Gauss rule on the reference square [0,1]^2.
/// Point q has coordinates (xi[q], eta[q]); weights sum to 1.
struct QuadratureRule {
    int order = 0;  ///< points per axis
    std::vector<double> xi;
    std::vector<double> eta;
    std::vector<double> weight;

    int size() const { return static_cast<int>(weight.size()); }
};

/// Cached Gauss-Legendre tensor rule with `order` points per axis (1..5).
const QuadratureRule& gauss_rule(int order);

/// Bilinear shape functions on the reference square, corners counterclockwise
/// from (0,0).
std::array<double, 4> q1_values(double xi, double eta);
/// Physical gradients of the four shape functions for an hx x hy element.
std::array<std::array<double, 2>, 4> q1_gradients(double xi, double eta, double hx, double hy);

/// A scalar coefficient sampled at every quadrature point of every element.
///
/// Elementwise-constant data is stored as the same value at all points of an
/// element; nodal data is interpolated bilinearly.
class QuadField {
public:
    QuadField() = default;
    QuadField(const StructuredGrid& grid, int order, double value);

    static QuadField from_elements(const StructuredGrid& grid, std::span<const double> per_element,
                                   int order = 2);
    static QuadField from_nodal(const StructuredGrid& grid, const Vector& nodal, int order = 2);
    static QuadField from_function(const StructuredGrid& grid, const std::function<double(Point)>& f,
                                   int order = 2);

    int order() const { return order_; }
    int num_elements() const { return num_elements_; }
    int points_per_element() const { return order_ * order_; }
    const QuadratureRule& rule() const { return gauss_rule(order_); }

    double operator()(int e, int q) const { return values_[static_cast<std::size_t>(e) * points_per_element() + q]; }
    double& operator()(int e, int q) { return values_[static_cast<std::size_t>(e) * points_per_element() + q]; }

    std::span<const double> values() const { return values_; }
    double min() const;
    double max() const;
    bool all_finite() const;

    /// Samples on the sub-grid of elements [ei0, ei0 + nx) x [ej0, ej0 + ny)
    /// of a parent grid with `parent_nx` elements per row.
    QuadField restricted(int parent_nx, int ei0, int ej0, int nx, int ny) const;

    template <class F>
    QuadField map(F&& f) const
    {
        QuadField out = *this;
        for (double& v : out.values_) v = f(v);
        return out;
    }

private:
    int order_ = 2;
    int num_elements_ = 0;
    std::vector<double> values_;
};

QuadField operator*(const QuadField& a, const QuadField& b);
QuadField operator+(const QuadField& a, const QuadField& b);
QuadField operator*(double s, const QuadField& a);

/// Maps grid nodes to unknowns. Several nodes may share one unknown
/// (periodic identification).
struct DofMap {
    std::vector<int> node_to_dof;
    int num_dofs = 0;

    static DofMap identity(const StructuredGrid& grid);
};

/// Discrete a(p, v) = int kappa grad p . grad v.
SparseMatrix assemble_stiffness(const StructuredGrid& grid, const QuadField& kappa,
                                const DofMap* dofs = nullptr);
/// Discrete m(p, v) = int w p v.
SparseMatrix assemble_mass(const StructuredGrid& grid, const QuadField& weight,
                           const DofMap* dofs = nullptr);
/// Discrete (b . grad p, v): row = test function v, column = trial p.
SparseMatrix assemble_convection(const StructuredGrid& grid, const QuadField& bx, const QuadField& by,
                                 const DofMap* dofs = nullptr);

/// Blocks of int c (p_i - p_j) v: `self` multiplies p_i, `cross` multiplies p_j.
struct CouplingBlocks {
    SparseMatrix self;
    SparseMatrix cross;
};
CouplingBlocks assemble_coupling(const StructuredGrid& grid, const QuadField& c,
                                 const DofMap* dofs = nullptr);

/// Load vector int f v.
Vector assemble_load(const StructuredGrid& grid, const QuadField& f, const DofMap* dofs = nullptr);

/// Load vector int (gx, gy) . grad v.
Vector assemble_flux_load(const StructuredGrid& grid, const QuadField& gx, const QuadField& gy,
                          const DofMap* dofs = nullptr);

/// Sum over elements of the quadrature rule applied to f.
double integrate(const StructuredGrid& grid, const QuadField& f);

/// Gradient of a nodal Q1 field at the quadrature points of the given order.
std::array<QuadField, 2> quadrature_gradients(const StructuredGrid& grid, const Vector& nodal, int order = 2);

/// Replaces rows and columns of masked unknowns by the identity and zeroes the
/// matching right-hand side entries (homogeneous Dirichlet data).
void apply_dirichlet(SparseMatrix& a, Vector* rhs, std::span<const char> mask);

/// max_ij |A_ij - A_ji| / max_ij |A_ij|.
double relative_asymmetry(const SparseMatrix& a);

/// LU factorization that can be reused for several right-hand sides.
class SparseFactorization {
public:
    explicit SparseFactorization(const SparseMatrix& a);
    Vector solve(const Vector& rhs) const;
    Matrix solve(const Matrix& rhs) const;
    int rows() const { return static_cast<int>(a_.rows()); }

private:
    SparseMatrix a_;
    std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

/// Solves A x = rhs to relative residual 1e-10, refining once or twice if needed.
Vector solve_sparse(const SparseMatrix& a, const Vector& rhs);

struct EigenPairs {
    Vector values;   ///< ascending
    Matrix vectors;  ///< columns, S-orthonormal
};

/// Smallest m eigenpairs of A v = lambda S v for symmetric A and SPD S.
/// Each eigenvector's largest-magnitude entry is made positive.
EigenPairs generalized_eigs(const Matrix& a, const Matrix& s, int m);

}  // namespace dcflow
