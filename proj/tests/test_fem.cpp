#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "dcflow/errors.hpp"
#include "dcflow/fem.hpp"

using namespace dcflow;

namespace {

constexpr double pi = std::numbers::pi;

QuadField random_elements(const StructuredGrid& g, double lo, double hi, unsigned seed, int order = 2)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(g.num_elements()));
    for (double& x : v) x = u(rng);
    return QuadField::from_elements(g, v, order);
}

double max_abs(const SparseMatrix& a)
{
    double m = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

/// L2 error of the Q1 solution of -lap u = f with u = sin(pi x) sin(pi y).
double poisson_error(int n)
{
    const StructuredGrid g = build_fine_grid(n, n);
    auto exact = [](Point p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
    SparseMatrix k = assemble_stiffness(g, QuadField(g, 2, 1.0));
    Vector b = assemble_load(g, QuadField::from_function(g, [&](Point p) { return 2 * pi * pi * exact(p); }, 3));
    apply_dirichlet(k, &b, g.boundary_mask());
    const Vector u = solve_sparse(k, b);
    const QuadField diff = QuadField::from_nodal(g, u, 4) + -1.0 * QuadField::from_function(g, exact, 4);
    return std::sqrt(integrate(g, diff * diff));
}

}  // namespace

TEST_CASE("gauss rules integrate polynomials")
{
    for (int order = 1; order <= 5; ++order) {
        const QuadratureRule& r = gauss_rule(order);
        double w = 0.0, x2 = 0.0;
        for (int q = 0; q < r.size(); ++q) {
            w += r.weight[q];
            x2 += r.weight[q] * r.xi[q] * r.xi[q];
        }
        CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
        if (order >= 2) CHECK(x2 == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(gauss_rule(6), InvalidArgument);
}

TEST_CASE("integrate and quadrature gradients")
{
    const StructuredGrid g = build_fine_grid(5, 3);
    const QuadField xy = QuadField::from_function(g, [](Point p) { return p.x * p.y; }, 2);
    CHECK(integrate(g, xy) == doctest::Approx(0.25).epsilon(1e-14));

    Vector lin(g.num_nodes());
    for (int n = 0; n < g.num_nodes(); ++n) {
        const Point p = g.node_point(n);
        lin[n] = 2.0 * p.x - 3.0 * p.y;
    }
    const auto grad = quadrature_gradients(g, lin, 3);
    CHECK(grad[0].min() == doctest::Approx(2.0));
    CHECK(grad[0].max() == doctest::Approx(2.0));
    CHECK(grad[1].min() == doctest::Approx(-3.0));
}

TEST_CASE("stiffness matrix")
{
    const StructuredGrid g = build_fine_grid(6, 6);
    const SparseMatrix k = assemble_stiffness(g, QuadField(g, 2, 1.0));
    // hand integration of the Q1 gradients over the four elements around a node
    CHECK(k.coeff(g.node(3, 3), g.node(3, 3)) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
    CHECK(k.coeff(g.node(3, 3), g.node(4, 3)) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
    CHECK(k.coeff(g.node(3, 3), g.node(4, 4)) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
    CHECK(std::abs(Vector(k * Vector::Ones(g.num_nodes())).maxCoeff()) < 1e-13);

    const SparseMatrix kr = assemble_stiffness(g, random_elements(g, 0.1, 1e5, 7));
    CHECK(relative_asymmetry(kr) <= 1e-12);

    const StructuredGrid g4 = build_fine_grid(4, 4);
    SparseMatrix k4 = assemble_stiffness(g4, QuadField(g4, 2, 1.0));
    apply_dirichlet(k4, nullptr, g4.boundary_mask());
    Eigen::SimplicialLLT<SparseMatrix> llt(k4);
    CHECK(llt.info() == Eigen::Success);

    QuadField neg(g, 2, 1.0);
    neg(0, 0) = -1.0;
    CHECK_THROWS_AS(assemble_stiffness(g, neg), InvalidArgument);
}

TEST_CASE("mass matrix")
{
    const StructuredGrid g = build_fine_grid(7, 5);
    const SparseMatrix m = assemble_mass(g, QuadField(g, 2, 1.0));
    CHECK(Vector(m * Vector::Ones(g.num_nodes())).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(max_abs(assemble_mass(g, QuadField(g, 2, 0.0))) == 0.0);
    CHECK(relative_asymmetry(assemble_mass(g, random_elements(g, 0.0, 2.0, 3))) <= 1e-12);
}

TEST_CASE("convection matrix")
{
    const StructuredGrid g = build_fine_grid(6, 4);
    const QuadField zero(g, 2, 0.0), one(g, 2, 1.0);
    CHECK(max_abs(assemble_convection(g, zero, zero)) == 0.0);

    Vector px(g.num_nodes());
    for (int n = 0; n < g.num_nodes(); ++n) px[n] = g.node_point(n).x;
    const Vector lhs = assemble_convection(g, one, zero) * px;
    const Vector rhs = assemble_mass(g, one) * Vector::Ones(g.num_nodes());
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);

    SUBCASE("entries match an elementwise quadrature oracle")
    {
        const QuadField bx = random_elements(g, -1.0, 1.0, 11, 3), by = random_elements(g, -1.0, 1.0, 12, 3);
        const SparseMatrix c = assemble_convection(g, bx, by);
        Matrix oracle = Matrix::Zero(g.num_nodes(), g.num_nodes());
        const QuadratureRule& r = gauss_rule(3);
        for (int e = 0; e < g.num_elements(); ++e) {
            const auto nodes = g.element_nodes(e);
            for (int q = 0; q < r.size(); ++q) {
                const auto phi = q1_values(r.xi[q], r.eta[q]);
                const auto grad = q1_gradients(r.xi[q], r.eta[q], g.hx(), g.hy());
                const double w = r.weight[q] * g.hx() * g.hy();
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        oracle(nodes[a], nodes[b]) += w * (bx(e, 0) * grad[b][0] + by(e, 0) * grad[b][1]) * phi[a];
            }
        }
        CHECK((Matrix(c) - oracle).cwiseAbs().maxCoeff() <= 1e-14);
        const SparseMatrix cm = assemble_convection(g, -1.0 * bx, -1.0 * by);
        CHECK((Matrix(cm) + Matrix(c)).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((Matrix(cm) - Matrix(c).transpose()).cwiseAbs().maxCoeff() > 1e-3);
    }
}

TEST_CASE("coupling blocks")
{
    const StructuredGrid g = build_fine_grid(8, 8);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector p(g.num_nodes());
    for (double& v : p) v = u(rng);
    const QuadField pq = QuadField::from_nodal(g, p, 2);
    const QuadField c = pq.map([](double v) { return 1e5 / (1.0 + std::abs(v)); });
    const CouplingBlocks blocks = assemble_coupling(g, c);
    CHECK(Vector(blocks.self * p + blocks.cross * p).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((Matrix(blocks.self) - Matrix(assemble_mass(g, c))).cwiseAbs().maxCoeff() == 0.0);

    const CouplingBlocks none = assemble_coupling(g, QuadField(g, 2, 0.0));
    CHECK(max_abs(none.self) == 0.0);
    CHECK(max_abs(none.cross) == 0.0);
}

TEST_CASE("sparse solves")
{
    SparseMatrix id(5, 5);
    id.setIdentity();
    const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
    CHECK((solve_sparse(id, b) - b).norm() == 0.0);

    // tridiag(-1, 2, -1) x = 1 has x_i = i (n + 1 - i) / 2
    const int n = 40;
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        t.emplace_back(i, i, 2.0);
        if (i > 0) t.emplace_back(i, i - 1, -1.0);
        if (i + 1 < n) t.emplace_back(i, i + 1, -1.0);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    const Vector x = solve_sparse(a, Vector::Ones(n));
    for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx((i + 1) * (n - i) / 2.0).epsilon(1e-12));

    std::mt19937 rng(9);
    std::normal_distribution<double> nd;
    Matrix r(50, 50);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) r(i, j) = nd(rng);
    const Matrix spd = r * r.transpose() + 50.0 * Matrix::Identity(50, 50);
    const SparseMatrix s = spd.sparseView();
    Vector rhs(50);
    for (double& v : rhs) v = nd(rng);
    const Vector y = solve_sparse(s, rhs);
    CHECK((s * y - rhs).norm() / rhs.norm() <= 1e-10);
}

TEST_CASE("generalized eigenpairs")
{
    std::mt19937 rng(21);
    std::normal_distribution<double> nd;
    auto spd = [&](int n, double shift) {
        Matrix r(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) r(i, j) = nd(rng);
        return Matrix(r * r.transpose() + shift * Matrix::Identity(n, n));
    };

    const Matrix s = spd(6, 1.0);
    const EigenPairs same = generalized_eigs(s, s, 6);
    for (int k = 0; k < 6; ++k) CHECK(same.values[k] == doctest::Approx(1.0).epsilon(1e-10));

    const Matrix d = Eigen::Vector3d(1, 2, 3).asDiagonal();
    const EigenPairs two = generalized_eigs(d, Matrix::Identity(3, 3), 2);
    REQUIRE(two.values.size() == 2);
    CHECK(two.values[0] == doctest::Approx(1.0));
    CHECK(two.values[1] == doctest::Approx(2.0));

    const Matrix a = spd(20, 0.5), b = spd(20, 2.0);
    const EigenPairs got = generalized_eigs(a, b, 7);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ref(a, b);
    for (int k = 0; k < 7; ++k) {
        CHECK(std::abs(got.values[k] - ref.eigenvalues()[k]) <= 1e-8 * std::abs(ref.eigenvalues()[k]));
        if (k > 0) CHECK(got.values[k] >= got.values[k - 1]);
    }
    const Matrix gram = got.vectors.transpose() * b * got.vectors;
    CHECK((gram - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((a * got.vectors - b * got.vectors * got.values.asDiagonal()).cwiseAbs().maxCoeff() <= 1e-8 * a.norm());

    Matrix indefinite = Matrix::Identity(3, 3);
    indefinite(2, 2) = -1.0;
    CHECK_THROWS_AS(generalized_eigs(Matrix::Identity(3, 3), indefinite, 2), DecompositionFailure);
}

TEST_CASE("manufactured solution converges at second order in L2")
{
    std::vector<double> err;
    for (int n : {8, 16, 32, 64}) err.push_back(poisson_error(n));
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double order = std::log2(err[k - 1] / err[k]);
        CAPTURE(order);
        CHECK(order >= 1.9);
    }
}
