#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include <Eigen/Eigenvalues>

#include "dcflow/errors.hpp"
#include "dcflow/fem.hpp"

namespace dcflow {

namespace {

QuadratureRule make_rule(int order)
{
    // Gauss-Legendre nodes/weights on [-1, 1]
    static const std::vector<std::vector<std::pair<double, double>>> table = {
        {{0.0, 2.0}},
        {{-0.57735026918962576451, 1.0}, {0.57735026918962576451, 1.0}},
        {{-0.77459666924148337704, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {0.77459666924148337704, 5.0 / 9.0}},
        {{-0.86113631159405257522, 0.34785484513745385737},
         {-0.33998104358485626480, 0.65214515486254614263},
         {0.33998104358485626480, 0.65214515486254614263},
         {0.86113631159405257522, 0.34785484513745385737}},
        {{-0.90617984593866399280, 0.23692688505618908751},
         {-0.53846931010568309104, 0.47862867049936646804},
         {0.0, 0.56888888888888888889},
         {0.53846931010568309104, 0.47862867049936646804},
         {0.90617984593866399280, 0.23692688505618908751}},
    };
    const auto& g = table[order - 1];
    QuadratureRule r;
    r.order = order;
    for (int b = 0; b < order; ++b)
        for (int a = 0; a < order; ++a) {
            r.xi.push_back(0.5 * (g[a].first + 1.0));
            r.eta.push_back(0.5 * (g[b].first + 1.0));
            r.weight.push_back(0.25 * g[a].second * g[b].second);
        }
    return r;
}

int dof_of(const DofMap* dofs, int node) { return dofs ? dofs->node_to_dof[node] : node; }
int dof_count(const StructuredGrid& grid, const DofMap* dofs) { return dofs ? dofs->num_dofs : grid.num_nodes(); }

void check_field(const StructuredGrid& grid, const QuadField& f, const char* what)
{
    if (f.num_elements() != grid.num_elements())
        throw InvalidArgument(std::string(what) + ": field has " + std::to_string(f.num_elements()) +
                              " elements, grid has " + std::to_string(grid.num_elements()));
}

// Precomputed reference data for one element size and rule.
struct ElementTables {
    std::vector<std::array<double, 4>> phi;
    std::vector<std::array<std::array<double, 2>, 4>> grad;
    std::vector<double> jw;  // weight * |element|
};

ElementTables tables(const StructuredGrid& grid, const QuadratureRule& rule)
{
    ElementTables t;
    const double area = grid.hx() * grid.hy();
    for (int q = 0; q < rule.size(); ++q) {
        t.phi.push_back(q1_values(rule.xi[q], rule.eta[q]));
        t.grad.push_back(q1_gradients(rule.xi[q], rule.eta[q], grid.hx(), grid.hy()));
        t.jw.push_back(rule.weight[q] * area);
    }
    return t;
}

template <class Local>
SparseMatrix assemble(const StructuredGrid& grid, const DofMap* dofs, Local&& local)
{
    const int n = dof_count(grid, dofs);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(grid.num_elements()) * 16);
    double ke[4][4];
    for (int e = 0; e < grid.num_elements(); ++e) {
        local(e, ke);
        const auto nodes = grid.element_nodes(e);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (ke[a][b] != 0.0) trip.emplace_back(dof_of(dofs, nodes[a]), dof_of(dofs, nodes[b]), ke[a][b]);
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace

const QuadratureRule& gauss_rule(int order)
{
    if (order < 1 || order > 5) throw InvalidArgument("gauss_rule: order must be 1..5, got " + std::to_string(order));
    static std::once_flag once;
    static std::array<QuadratureRule, 5> rules;
    std::call_once(once, [] {
        for (int o = 1; o <= 5; ++o) rules[o - 1] = make_rule(o);
    });
    return rules[order - 1];
}

std::array<double, 4> q1_values(double xi, double eta)
{
    return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

std::array<std::array<double, 2>, 4> q1_gradients(double xi, double eta, double hx, double hy)
{
    return {{{-(1 - eta) / hx, -(1 - xi) / hy},
             {(1 - eta) / hx, -xi / hy},
             {eta / hx, xi / hy},
             {-eta / hx, (1 - xi) / hy}}};
}

// ---------------------------------------------------------------------------
// QuadField

QuadField::QuadField(const StructuredGrid& grid, int order, double value)
    : order_(order), num_elements_(grid.num_elements())
{
    gauss_rule(order);
    values_.assign(static_cast<std::size_t>(num_elements_) * order * order, value);
}

QuadField QuadField::from_elements(const StructuredGrid& grid, std::span<const double> per_element, int order)
{
    if (static_cast<int>(per_element.size()) != grid.num_elements())
        throw InvalidArgument("QuadField::from_elements: expected " + std::to_string(grid.num_elements()) +
                              " values, got " + std::to_string(per_element.size()));
    QuadField f(grid, order, 0.0);
    const int np = f.points_per_element();
    for (int e = 0; e < grid.num_elements(); ++e)
        for (int q = 0; q < np; ++q) f(e, q) = per_element[e];
    return f;
}

QuadField QuadField::from_nodal(const StructuredGrid& grid, const Vector& nodal, int order)
{
    if (nodal.size() != grid.num_nodes())
        throw InvalidArgument("QuadField::from_nodal: expected " + std::to_string(grid.num_nodes()) +
                              " values, got " + std::to_string(nodal.size()));
    QuadField f(grid, order, 0.0);
    const QuadratureRule& rule = f.rule();
    std::vector<std::array<double, 4>> phi;
    for (int q = 0; q < rule.size(); ++q) phi.push_back(q1_values(rule.xi[q], rule.eta[q]));
    for (int e = 0; e < grid.num_elements(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int q = 0; q < rule.size(); ++q) {
            double v = 0.0;
            for (int a = 0; a < 4; ++a) v += phi[q][a] * nodal[nodes[a]];
            f(e, q) = v;
        }
    }
    return f;
}

QuadField QuadField::from_function(const StructuredGrid& grid, const std::function<double(Point)>& fn, int order)
{
    QuadField f(grid, order, 0.0);
    const QuadratureRule& rule = f.rule();
    for (int e = 0; e < grid.num_elements(); ++e) {
        const Point o = grid.element_origin(e);
        for (int q = 0; q < rule.size(); ++q)
            f(e, q) = fn({o.x + rule.xi[q] * grid.hx(), o.y + rule.eta[q] * grid.hy()});
    }
    return f;
}

double QuadField::min() const
{
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double QuadField::max() const
{
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

bool QuadField::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

QuadField QuadField::restricted(int parent_nx, int ei0, int ej0, int nx, int ny) const
{
    QuadField out;
    out.order_ = order_;
    out.num_elements_ = nx * ny;
    const int np = points_per_element();
    out.values_.resize(static_cast<std::size_t>(nx) * ny * np);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int src = (ej0 + j) * parent_nx + (ei0 + i);
            std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(src) * np, np,
                        out.values_.begin() + static_cast<std::ptrdiff_t>(j * nx + i) * np);
        }
    return out;
}

namespace {

void check_compatible(const QuadField& a, const QuadField& b)
{
    if (a.order() != b.order() || a.num_elements() != b.num_elements())
        throw InvalidArgument("QuadField arithmetic on incompatible fields");
}

}  // namespace

QuadField operator*(const QuadField& a, const QuadField& b)
{
    check_compatible(a, b);
    QuadField out = a;
    for (int e = 0; e < a.num_elements(); ++e)
        for (int q = 0; q < a.points_per_element(); ++q) out(e, q) *= b(e, q);
    return out;
}

QuadField operator+(const QuadField& a, const QuadField& b)
{
    check_compatible(a, b);
    QuadField out = a;
    for (int e = 0; e < a.num_elements(); ++e)
        for (int q = 0; q < a.points_per_element(); ++q) out(e, q) += b(e, q);
    return out;
}

QuadField operator*(double s, const QuadField& a)
{
    return a.map([s](double v) { return s * v; });
}

DofMap DofMap::identity(const StructuredGrid& grid)
{
    DofMap d;
    d.num_dofs = grid.num_nodes();
    d.node_to_dof.resize(d.num_dofs);
    for (int n = 0; n < d.num_dofs; ++n) d.node_to_dof[n] = n;
    return d;
}

// ---------------------------------------------------------------------------
// assembly

SparseMatrix assemble_stiffness(const StructuredGrid& grid, const QuadField& kappa, const DofMap* dofs)
{
    check_field(grid, kappa, "assemble_stiffness");
    if (!kappa.all_finite() || !(kappa.min() > 0.0))
        throw InvalidArgument("assemble_stiffness: coefficient must be positive and finite");
    const ElementTables t = tables(grid, kappa.rule());
    const int nq = kappa.points_per_element();
    return assemble(grid, dofs, [&](int e, double (&ke)[4][4]) {
        for (auto& row : ke) std::fill(std::begin(row), std::end(row), 0.0);
        for (int q = 0; q < nq; ++q) {
            const double w = kappa(e, q) * t.jw[q];
            const auto& g = t.grad[q];
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) ke[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    });
}

SparseMatrix assemble_mass(const StructuredGrid& grid, const QuadField& weight, const DofMap* dofs)
{
    check_field(grid, weight, "assemble_mass");
    if (!weight.all_finite() || weight.min() < 0.0)
        throw InvalidArgument("assemble_mass: weight must be nonnegative and finite");
    const ElementTables t = tables(grid, weight.rule());
    const int nq = weight.points_per_element();
    return assemble(grid, dofs, [&](int e, double (&ke)[4][4]) {
        for (auto& row : ke) std::fill(std::begin(row), std::end(row), 0.0);
        for (int q = 0; q < nq; ++q) {
            const double w = weight(e, q) * t.jw[q];
            const auto& p = t.phi[q];
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) ke[a][b] += w * p[a] * p[b];
        }
    });
}

SparseMatrix assemble_convection(const StructuredGrid& grid, const QuadField& bx, const QuadField& by,
                                 const DofMap* dofs)
{
    check_field(grid, bx, "assemble_convection");
    check_field(grid, by, "assemble_convection");
    check_compatible(bx, by);
    if (!bx.all_finite() || !by.all_finite()) throw InvalidArgument("assemble_convection: velocity must be finite");
    const ElementTables t = tables(grid, bx.rule());
    const int nq = bx.points_per_element();
    return assemble(grid, dofs, [&](int e, double (&ke)[4][4]) {
        for (auto& row : ke) std::fill(std::begin(row), std::end(row), 0.0);
        for (int q = 0; q < nq; ++q) {
            const double wx = bx(e, q) * t.jw[q];
            const double wy = by(e, q) * t.jw[q];
            const auto& p = t.phi[q];
            const auto& g = t.grad[q];
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) ke[a][b] += p[a] * (wx * g[b][0] + wy * g[b][1]);
        }
    });
}

CouplingBlocks assemble_coupling(const StructuredGrid& grid, const QuadField& c, const DofMap* dofs)
{
    check_field(grid, c, "assemble_coupling");
    if (!c.all_finite() || c.min() < 0.0)
        throw InvalidArgument("assemble_coupling: transfer coefficient must be nonnegative and finite");
    CouplingBlocks out;
    out.self = assemble_mass(grid, c, dofs);
    out.cross = -out.self;
    return out;
}

Vector assemble_load(const StructuredGrid& grid, const QuadField& f, const DofMap* dofs)
{
    check_field(grid, f, "assemble_load");
    const ElementTables t = tables(grid, f.rule());
    const int nq = f.points_per_element();
    Vector out = Vector::Zero(dof_count(grid, dofs));
    for (int e = 0; e < grid.num_elements(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int q = 0; q < nq; ++q) {
            const double w = f(e, q) * t.jw[q];
            for (int a = 0; a < 4; ++a) out[dof_of(dofs, nodes[a])] += w * t.phi[q][a];
        }
    }
    return out;
}

Vector assemble_flux_load(const StructuredGrid& grid, const QuadField& gx, const QuadField& gy, const DofMap* dofs)
{
    check_field(grid, gx, "assemble_flux_load");
    check_compatible(gx, gy);
    const ElementTables t = tables(grid, gx.rule());
    const int nq = gx.points_per_element();
    Vector out = Vector::Zero(dof_count(grid, dofs));
    for (int e = 0; e < grid.num_elements(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int q = 0; q < nq; ++q) {
            const double wx = gx(e, q) * t.jw[q], wy = gy(e, q) * t.jw[q];
            for (int a = 0; a < 4; ++a) out[dof_of(dofs, nodes[a])] += wx * t.grad[q][a][0] + wy * t.grad[q][a][1];
        }
    }
    return out;
}

double integrate(const StructuredGrid& grid, const QuadField& f)
{
    check_field(grid, f, "integrate");
    const ElementTables t = tables(grid, f.rule());
    double sum = 0.0;
    for (int e = 0; e < grid.num_elements(); ++e)
        for (int q = 0; q < f.points_per_element(); ++q) sum += f(e, q) * t.jw[q];
    return sum;
}

std::array<QuadField, 2> quadrature_gradients(const StructuredGrid& grid, const Vector& nodal, int order)
{
    if (nodal.size() != grid.num_nodes()) throw InvalidArgument("quadrature_gradients: nodal size mismatch");
    std::array<QuadField, 2> g{QuadField(grid, order, 0.0), QuadField(grid, order, 0.0)};
    const ElementTables t = tables(grid, gauss_rule(order));
    for (int e = 0; e < grid.num_elements(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int q = 0; q < order * order; ++q) {
            double gx = 0.0, gy = 0.0;
            for (int a = 0; a < 4; ++a) {
                gx += nodal[nodes[a]] * t.grad[q][a][0];
                gy += nodal[nodes[a]] * t.grad[q][a][1];
            }
            g[0](e, q) = gx;
            g[1](e, q) = gy;
        }
    }
    return g;
}

void apply_dirichlet(SparseMatrix& a, Vector* rhs, std::span<const char> mask)
{
    if (static_cast<Eigen::Index>(mask.size()) != a.rows() || a.rows() != a.cols())
        throw InvalidArgument("apply_dirichlet: mask size does not match the matrix");
    if (rhs && rhs->size() != a.rows()) throw InvalidArgument("apply_dirichlet: rhs size does not match the matrix");
    a.prune([&](Eigen::Index r, Eigen::Index c, double) { return !mask[r] && !mask[c]; });
    std::vector<Eigen::Triplet<double>> diag;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) diag.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    SparseMatrix id(a.rows(), a.cols());
    id.setFromTriplets(diag.begin(), diag.end());
    a += id;
    a.makeCompressed();
    if (rhs)
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) (*rhs)[static_cast<Eigen::Index>(i)] = 0.0;
}

double relative_asymmetry(const SparseMatrix& a)
{
    const SparseMatrix at = a.transpose();
    const SparseMatrix d = a - at;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) num = std::max(num, std::abs(it.value()));
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) den = std::max(den, std::abs(it.value()));
    return den > 0.0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// solvers

SparseFactorization::SparseFactorization(const SparseMatrix& a)
    : a_(a), lu_(std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>())
{
    if (a.rows() != a.cols()) throw InvalidArgument("SparseFactorization: matrix is not square");
    a_.makeCompressed();
    lu_->analyzePattern(a_);
    lu_->factorize(a_);
    if (lu_->info() != Eigen::Success)
        throw SolverFailure("sparse LU factorization failed: " + lu_->lastErrorMessage());
}

Vector SparseFactorization::solve(const Vector& rhs) const
{
    if (rhs.size() != a_.rows()) throw InvalidArgument("SparseFactorization::solve: rhs size mismatch");
    Vector x = lu_->solve(rhs);
    const double bn = rhs.norm();
    double rn = bn > 0.0 ? (rhs - a_ * x).norm() : 0.0;
    // iterative refinement until the residual stops shrinking
    for (int it = 0; it < 3 && rn > 1e-12 * bn; ++it) {
        const Vector dx = lu_->solve(Vector(rhs - a_ * x));
        const Vector y = x + dx;
        const double yn = (rhs - a_ * y).norm();
        if (!(yn < rn)) break;
        x = y;
        rn = yn;
    }
    if (!x.allFinite()) throw SolverFailure("sparse solve produced non-finite values");
    return x;
}

Matrix SparseFactorization::solve(const Matrix& rhs) const
{
    if (rhs.rows() != a_.rows()) throw InvalidArgument("SparseFactorization::solve: rhs size mismatch");
    Matrix x = lu_->solve(rhs);
    if (!x.allFinite()) throw SolverFailure("sparse solve produced non-finite values");
    return x;
}

Vector solve_sparse(const SparseMatrix& a, const Vector& rhs)
{
    const SparseFactorization lu(a);
    Vector x = lu.solve(rhs);
    const double bn = rhs.norm();
    const double rn = (rhs - a * x).norm();
    if (rn <= 1e-10 * bn) return x;
    // High-contrast systems can sit below that target's rounding floor; accept
    // a backward-stable answer instead.
    const double scale = a.norm() * x.norm() + bn;
    if (rn <= 1e-13 * scale) return x;
    throw SolverFailure("sparse solve residual " + std::to_string(rn / std::max(bn, 1e-300)) +
                        " relative to the right-hand side (matrix may be singular)");
}

EigenPairs generalized_eigs(const Matrix& a, const Matrix& s, int m)
{
    if (a.rows() != a.cols() || s.rows() != s.cols() || a.rows() != s.rows())
        throw InvalidArgument("generalized_eigs: matrix sizes do not match");
    if (m < 0) throw InvalidArgument("generalized_eigs: negative eigenpair count");
    m = std::min<int>(m, static_cast<int>(a.rows()));

    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw DecompositionFailure("generalized_eigs: mass matrix is not positive definite");

    // A v = lambda S v  ->  (L^-1 A L^-T) w = lambda w with v = L^-T w
    Matrix c = llt.matrixL().solve(a);
    c = llt.matrixL().solve(c.transpose()).transpose();
    c = 0.5 * (c + c.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    if (es.info() != Eigen::Success) throw DecompositionFailure("generalized_eigs: eigensolver did not converge");

    EigenPairs out;
    out.values = es.eigenvalues().head(m);
    out.vectors = llt.matrixU().solve(es.eigenvectors().leftCols(m));
    for (int k = 0; k < m; ++k) {
        Eigen::Index idx;
        out.vectors.col(k).cwiseAbs().maxCoeff(&idx);
        if (out.vectors(idx, k) < 0) out.vectors.col(k) *= -1.0;
    }
    return out;
}

}  // namespace dcflow
