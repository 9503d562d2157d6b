#include "dcflow/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <json.hpp>

#include "dcflow/errors.hpp"
#include "dcflow/parallel.hpp"

namespace dcflow {

UnitCellMesh::UnitCellMesh(int n) : n_(n)
{
    if (n < 2) throw InvalidArgument("unit cell mesh needs at least 2 elements per side, got " + std::to_string(n));
    grid_ = StructuredGrid(n, n);
    dofs_.num_dofs = n * n;
    dofs_.node_to_dof.resize(static_cast<std::size_t>(grid_.num_nodes()));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) dofs_.node_to_dof[grid_.node(i, j)] = (j % n) * n + (i % n);
    laplace_ = assemble_stiffness(grid_, QuadField(grid_, 2, 1.0), &dofs_);
}

Point UnitCellMesh::dof_point(int d) const
{
    return {static_cast<double>(d % n_) / n_, static_cast<double>(d / n_) / n_};
}

double UnitCellMesh::mean(const Vector& u) const
{
    if (u.size() != num_dofs()) throw InvalidArgument("unit cell: vector size does not match the mesh");
    // every periodic hat integrates to h^2
    return u.sum() / (static_cast<double>(n_) * n_);
}

Vector UnitCellMesh::remove_mean(const Vector& u) const
{
    return u - Vector::Constant(u.size(), mean(u));
}

Vector UnitCellMesh::nodal(const Vector& u) const
{
    if (u.size() != num_dofs()) throw InvalidArgument("unit cell: vector size does not match the mesh");
    Vector out(grid_.num_nodes());
    for (int g = 0; g < grid_.num_nodes(); ++g) out[g] = u[dofs_.node_to_dof[g]];
    return out;
}

double UnitCellMesh::gradient_norm(const Vector& u) const
{
    if (u.size() != num_dofs()) throw InvalidArgument("unit cell: vector size does not match the mesh");
    return std::sqrt(std::max(0.0, u.dot(laplace_ * u)));
}

QuadField UnitCellMesh::sample(const std::function<double(Point)>& f, int order) const
{
    return QuadField::from_function(grid_, f, order);
}

Vector solve_periodic(const UnitCellMesh& mesh, const SparseMatrix& a, const Vector& rhs)
{
    if (a.rows() != mesh.num_dofs() || rhs.size() != mesh.num_dofs())
        throw InvalidArgument("periodic solve: system size does not match the mesh");
    SparseMatrix pinned = a;
    Vector b = rhs;
    std::vector<char> mask(static_cast<std::size_t>(a.rows()), 0);
    mask[0] = 1;
    apply_dirichlet(pinned, &b, mask);
    return mesh.remove_mean(solve_sparse(pinned, b));
}

Vector cell_n_rhs(const UnitCellMesh& mesh, const QuadField& k, int direction)
{
    if (direction < 0 || direction > 1) throw InvalidArgument("cell problem direction must be 0 or 1");
    const QuadField zero = 0.0 * k;
    const QuadField minus_k = -1.0 * k;
    return direction == 0 ? assemble_flux_load(mesh.grid(), minus_k, zero, &mesh.dofs())
                          : assemble_flux_load(mesh.grid(), zero, minus_k, &mesh.dofs());
}

Vector solve_cell_N(const UnitCellMesh& mesh, const QuadField& k, int direction)
{
    const Vector rhs = cell_n_rhs(mesh, k, direction);
    return solve_periodic(mesh, assemble_stiffness(mesh.grid(), k, &mesh.dofs()), rhs);
}

Vector cell_m_rhs(const UnitCellMesh& mesh, const QuadField& q, MeanPolicy policy)
{
    const double avg = integrate(mesh.grid(), q);
    const double scale = std::max({1.0, std::abs(q.min()), std::abs(q.max())});
    if (policy == MeanPolicy::Subtract)
        return assemble_load(mesh.grid(), q.map([avg](double v) { return v - avg; }), &mesh.dofs());
    if (std::abs(avg) > kMeanTolerance * scale)
        throw InvalidArgument("cell problem for M: transfer term has cell average " + std::to_string(avg) +
                              ", expected 0");
    return assemble_load(mesh.grid(), q, &mesh.dofs());
}

Vector solve_cell_M(const UnitCellMesh& mesh, const QuadField& k, const QuadField& q, MeanPolicy policy)
{
    const Vector rhs = cell_m_rhs(mesh, q, policy);
    return solve_periodic(mesh, assemble_stiffness(mesh.grid(), k, &mesh.dofs()), rhs);
}

EffectiveTensor effective_tensor(const UnitCellMesh& mesh, const QuadField& k, const Vector& n1, const Vector& n2)
{
    const std::array<std::array<QuadField, 2>, 2> grad{quadrature_gradients(mesh.grid(), mesh.nodal(n1), k.order()),
                                                       quadrature_gradients(mesh.grid(), mesh.nodal(n2), k.order())};
    const double area_k = integrate(mesh.grid(), k);
    Eigen::Matrix2d kk;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) kk(i, j) = (i == j ? area_k : 0.0) + integrate(mesh.grid(), k * grad[j][i]);
    EffectiveTensor out;
    const double big = kk.cwiseAbs().maxCoeff();
    out.asymmetry = big > 0.0 ? std::abs(kk(0, 1) - kk(1, 0)) / big : 0.0;
    out.value = 0.5 * (kk + kk.transpose());
    return out;
}

CellSolutions solve_cell_problems(const UnitCellMesh& mesh, const CellModel& model, double p1, double p2,
                                  MeanPolicy policy, int order)
{
    CellSolutions s;
    s.p1 = p1;
    s.p2 = p2;
    const std::array<double, 2> p{p1, p2};
    for (int j = 0; j < 2; ++j) {
        const QuadField k = mesh.sample([&](Point y) { return model.k(j, y, p[j]); }, order);
        if (!(k.min() > 0.0)) throw InvalidArgument("cell conductivity must be positive");
        const QuadField q = mesh.sample([&](Point y) { return model.eval_q(j, y, p1, p2); }, order);
        for (int i = 0; i < 2; ++i) s.n[i][j] = solve_cell_N(mesh, k, i);
        s.m[j] = solve_cell_M(mesh, k, q, policy);
    }
    return s;
}

EffectiveCoefficients homogenized_coefficients(const UnitCellMesh& mesh, const CellModel& model,
                                               const CellSolutions& cells, int order)
{
    for (int j = 0; j < 2; ++j) {
        bool ok = cells.m[j].size() == mesh.num_dofs();
        for (int i = 0; i < 2; ++i) ok = ok && cells.n[i][j].size() == mesh.num_dofs();
        if (!ok) throw InvalidArgument("cell solutions do not match the unit cell mesh");
    }
    const StructuredGrid& g = mesh.grid();
    const double p1 = cells.p1, p2 = cells.p2;
    const std::array<double, 2> p{p1, p2};

    std::array<QuadField, 2> m;
    std::array<std::array<QuadField, 2>, 2> n;  // [direction][continuum]
    for (int j = 0; j < 2; ++j) {
        m[j] = QuadField::from_nodal(g, mesh.nodal(cells.m[j]), order);
        for (int i = 0; i < 2; ++i) n[i][j] = QuadField::from_nodal(g, mesh.nodal(cells.n[i][j]), order);
    }

    EffectiveCoefficients out;
    out.p1 = p1;
    out.p2 = p2;
    for (int j = 0; j < 2; ++j) {
        const int o = 1 - j;
        const QuadField k = mesh.sample([&](Point y) { return model.k(j, y, p[j]); }, order);
        const QuadField q = mesh.sample([&](Point y) { return model.eval_q(j, y, p1, p2); }, order);
        std::array<QuadField, 2> dq;
        for (int r = 0; r < 2; ++r) dq[r] = mesh.sample([&](Point y) { return model.eval_dq(j, r, y, p1, p2); }, order);

        out.k[j] = effective_tensor(mesh, k, cells.n[0][j], cells.n[1][j]);

        const auto gm = quadrature_gradients(g, mesh.nodal(cells.m[j]), order);
        out.g[j] = {integrate(g, k * gm[0]), integrate(g, k * gm[1])};

        for (int mm = 0; mm < 2; ++mm) {
            const double sign = (j + mm) % 2 == 0 ? 1.0 : -1.0;
            for (int i = 0; i < 2; ++i)
                out.b[j][mm][i] = sign * integrate(g, q * n[i][mm]) + (p[j] - p[o]) * integrate(g, dq[mm] * n[i][mm]);
        }

        double c = -integrate(g, q * (m[0] + m[1]));
        for (int r = 0; r < 2; ++r) c += integrate(g, dq[r] * m[r]) * (p[1 - r] - p[r]);
        out.c[j] = c;
    }
    return out;
}

std::vector<EffectiveCoefficients> effective_table(const UnitCellMesh& mesh, const CellModel& model,
                                                   const std::vector<double>& p1, const std::vector<double>& p2,
                                                   MeanPolicy policy)
{
    std::vector<EffectiveCoefficients> out(p1.size() * p2.size());
    parallel_for(out.size(), [&](std::size_t idx) {
        const double a = p1[idx / p2.size()], b = p2[idx % p2.size()];
        out[idx] = homogenized_coefficients(mesh, model, solve_cell_problems(mesh, model, a, b, policy));
    });
    return out;
}

void write_effective_table(std::ostream& out, const std::vector<EffectiveCoefficients>& table)
{
    using nlohmann::json;
    auto vec = [](const Eigen::Vector2d& v) { return json::array({v[0], v[1]}); };
    json rows = json::array();
    for (const EffectiveCoefficients& e : table) {
        json row;
        row["p1"] = e.p1;
        row["p2"] = e.p2;
        for (int j = 0; j < 2; ++j) {
            const std::string s = std::to_string(j + 1);
            const Eigen::Matrix2d& k = e.k[j].value;
            row["K" + s] = json::array({json::array({k(0, 0), k(0, 1)}), json::array({k(1, 0), k(1, 1)})});
            row["K" + s + "_asymmetry"] = e.k[j].asymmetry;
            row["c" + s] = e.c[j];
            row["g" + s] = vec(e.g[j]);
            for (int m = 0; m < 2; ++m) row["b" + s + std::to_string(m + 1)] = vec(e.b[j][m]);
        }
        rows.push_back(std::move(row));
    }
    out << rows.dump(2) << '\n';
}

}  // namespace dcflow
