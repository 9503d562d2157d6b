#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dcflow/errors.hpp"
#include "dcflow/homogenize.hpp"

using namespace dcflow;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double tp = 2.0 * pi;

double max_abs_diff(const UnitCellMesh& mesh, const Vector& u, const std::function<double(Point)>& f)
{
    double e = 0.0;
    for (int d = 0; d < mesh.num_dofs(); ++d) e = std::max(e, std::abs(u[d] - f(mesh.dof_point(d))));
    return e;
}

/// L2(Y) distance between a periodic FE function and f.
double l2_diff(const UnitCellMesh& mesh, const Vector& u, const std::function<double(Point)>& f)
{
    const QuadField d = QuadField::from_nodal(mesh.grid(), mesh.nodal(u), 4) + -1.0 * mesh.sample(f, 4);
    return std::sqrt(integrate(mesh.grid(), d * d));
}

}  // namespace

TEST_CASE("periodic cell mesh")
{
    const UnitCellMesh mesh(8);
    CHECK(mesh.num_dofs() == 64);
    CHECK(mesh.dofs().node_to_dof[mesh.grid().node(8, 3)] == mesh.dofs().node_to_dof[mesh.grid().node(0, 3)]);
    CHECK(mesh.mean(Vector::Constant(64, 3.0)) == doctest::Approx(3.0));
    CHECK(mesh.gradient_norm(Vector::Constant(64, 3.0)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(UnitCellMesh(1), InvalidArgument);
}

TEST_CASE("constant coefficient")
{
    const UnitCellMesh mesh(16);
    const QuadField k = mesh.sample([](Point) { return 2.5; });
    const Vector n1 = solve_cell_N(mesh, k, 0), n2 = solve_cell_N(mesh, k, 1);
    CHECK(n1.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(n2.cwiseAbs().maxCoeff() <= 1e-12);
    const EffectiveTensor t = effective_tensor(mesh, k, n1, n2);
    CHECK(t.value(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(t.value(1, 1) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(std::abs(t.value(0, 1)) <= 1e-12);
}

TEST_CASE("laminate")
{
    const UnitCellMesh mesh(128);
    const QuadField k = mesh.sample([](Point y) { return y.x < 0.5 ? 1.0 : 4.0; });
    const Vector n1 = solve_cell_N(mesh, k, 0), n2 = solve_cell_N(mesh, k, 1);
    const EffectiveTensor t = effective_tensor(mesh, k, n1, n2);
    CHECK(std::abs(t.value(0, 0) - 1.6) <= 1e-3 * 1.6);
    CHECK(std::abs(t.value(1, 1) - 2.5) <= 1e-3 * 2.5);
    CHECK(std::abs(mesh.mean(n1)) <= 1e-10);

    // 1D oracle: (k (1 + N')) is constant and equals the harmonic mean 1.6
    auto oracle = [](Point y) {
        const double s = y.x < 0.5 ? (1.6 - 1.0) * y.x : 0.3 + (0.4 - 1.0) * (y.x - 0.5);
        return s - 0.15;
    };
    CHECK(max_abs_diff(mesh, n1, oracle) <= 1e-10);
}

TEST_CASE("sinusoidal coefficient")
{
    const UnitCellMesh mesh(128);
    const QuadField k = mesh.sample([](Point y) { return 2.0 + std::sin(tp * y.x); });
    const Vector n1 = solve_cell_N(mesh, k, 0), n2 = solve_cell_N(mesh, k, 1);
    CHECK(n2.norm() <= 1e-8);
    const EffectiveTensor t = effective_tensor(mesh, k, n1, n2);
    CHECK(std::abs(t.value(0, 0) - std::sqrt(3.0)) <= 1e-3 * std::sqrt(3.0));
    CHECK(t.value(1, 1) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(std::abs(mesh.mean(n1)) <= 1e-10);
    CHECK(t.asymmetry <= 1e-10);
}

TEST_CASE("transfer cell problem")
{
    SUBCASE("zero transfer")
    {
        const UnitCellMesh mesh(16);
        const QuadField one = mesh.sample([](Point) { return 1.0; });
        CHECK(solve_cell_M(mesh, one, mesh.sample([](Point) { return 0.0; })).norm() == 0.0);
    }

    SUBCASE("analytic solutions converge at second order")
    {
        const std::vector<std::pair<std::function<double(Point)>, std::string>> cases{
            {[](Point y) { return std::cos(tp * y.x); }, "cos"},
            {[](Point y) { return std::sin(tp * y.x) + std::sin(tp * y.y); }, "sin+sin"},
        };
        for (const auto& [q, name] : cases) {
            CAPTURE(name);
            std::vector<double> err;
            for (int n : {32, 64, 128}) {
                const UnitCellMesh mesh(n);
                const Vector m = solve_cell_M(mesh, mesh.sample([](Point) { return 1.0; }), mesh.sample(q));
                CHECK(std::abs(mesh.mean(m)) <= 1e-10);
                err.push_back(l2_diff(mesh, m, [&](Point y) { return q(y) / (4 * pi * pi); }));
            }
            CHECK(err.back() <= 1e-4);
            for (std::size_t k = 1; k < err.size(); ++k) {
                CAPTURE(err[k]);
                CHECK(std::log2(err[k - 1] / err[k]) >= 1.9);
            }
        }
    }

    SUBCASE("nonzero mean")
    {
        const UnitCellMesh mesh(16);
        const QuadField one = mesh.sample([](Point) { return 1.0; });
        const QuadField q = mesh.sample([](Point y) { return 1.0 + std::cos(tp * y.x); });
        CHECK_THROWS_AS(solve_cell_M(mesh, one, q), InvalidArgument);
        const Vector m = solve_cell_M(mesh, one, q, MeanPolicy::Subtract);
        const Vector ref = solve_cell_M(mesh, one, mesh.sample([](Point y) { return std::cos(tp * y.x); }));
        CHECK((m - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("homogenized coefficients")
{
    SUBCASE("no transfer leaves two decoupled diffusion equations")
    {
        CellModel m = lipschitz_cell_model();
        m.q = [](int, Point, double, double) { return 0.0; };
        m.dq = [](int, int, Point, double, double) { return 0.0; };
        const UnitCellMesh mesh(32);
        const CellSolutions s = solve_cell_problems(mesh, m, 0.2, 0.6);
        CHECK(s.m[0].norm() == 0.0);
        const EffectiveCoefficients e = homogenized_coefficients(mesh, m, s);
        for (int j = 0; j < 2; ++j) {
            CHECK(e.c[j] == 0.0);
            CHECK(e.g[j].norm() == 0.0);
            for (int mm = 0; mm < 2; ++mm) CHECK(e.b[j][mm].norm() == 0.0);
        }
    }

    SUBCASE("constant conductivity removes every Q N term")
    {
        CellModel m = lipschitz_cell_model();
        m.k = [](int, Point, double p) { return 2.0 + p; };
        const UnitCellMesh mesh(32);
        const EffectiveCoefficients e = homogenized_coefficients(mesh, m, solve_cell_problems(mesh, m, 0.2, 0.6));
        for (int j = 0; j < 2; ++j)
            for (int mm = 0; mm < 2; ++mm) CHECK(e.b[j][mm].norm() <= 1e-12);
        CHECK(e.k[0].value(0, 0) == doctest::Approx(2.2));
        CHECK(e.k[1].value(1, 1) == doctest::Approx(2.6));
    }

    SUBCASE("refinement oracle")
    {
        const CellModel m = lipschitz_cell_model();
        const UnitCellMesh coarse(64), fine(128);
        const EffectiveCoefficients a = homogenized_coefficients(coarse, m, solve_cell_problems(coarse, m, 0.3, 0.7));
        const EffectiveCoefficients b = homogenized_coefficients(fine, m, solve_cell_problems(fine, m, 0.3, 0.7));
        auto close = [](double x, double y) { return std::abs(x - y) <= 0.01 * std::abs(y) + 1e-10; };
        for (int j = 0; j < 2; ++j) {
            CHECK(close(a.k[j].value(0, 0), b.k[j].value(0, 0)));
            CHECK(close(a.k[j].value(1, 1), b.k[j].value(1, 1)));
            CHECK(close(a.c[j], b.c[j]));
            for (int i = 0; i < 2; ++i) {
                CHECK(close(a.g[j][i], b.g[j][i]));
                for (int mm = 0; mm < 2; ++mm) CHECK(close(a.b[j][mm][i], b.b[j][mm][i]));
            }
        }
        CHECK(std::abs(b.c[0]) > 1e-6);
        CHECK(b.b[0][0].norm() > 1e-6);
    }
}

TEST_CASE("effective table output")
{
    const UnitCellMesh mesh(16);
    const auto table = effective_table(mesh, lipschitz_cell_model(), {0.0, 1.0}, {0.5});
    REQUIRE(table.size() == 2);
    CHECK(table[1].p1 == 1.0);
    CHECK(table[1].p2 == 0.5);
    std::ostringstream out;
    write_effective_table(out, table);
    const auto j = nlohmann::json::parse(out.str());
    REQUIRE(j.size() == 2);
    CHECK(j[0].contains("K1"));
    CHECK(j[0].contains("b21"));
    CHECK(j[1]["p1"] == 1.0);
}
