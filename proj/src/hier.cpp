#include "dcflow/hier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "dcflow/errors.hpp"
#include "dcflow/parallel.hpp"

namespace dcflow {

MacrogridHierarchy::MacrogridHierarchy(double a, double b, int depth) : a_(a), b_(b), depth_(depth)
{
    if (!(a < b)) throw InvalidArgument("hierarchy: need a < b");
    if (depth < 1) throw InvalidArgument("hierarchy: depth must be at least 1, got " + std::to_string(depth));
    if (depth > 20) throw InvalidArgument("hierarchy: depth " + std::to_string(depth) + " is too large");
}

void MacrogridHierarchy::check_index(int k) const
{
    if (k < 0 || k >= size())
        throw InvalidArgument("hierarchy: point index " + std::to_string(k) + " outside 0.." +
                              std::to_string(size() - 1));
}

double MacrogridHierarchy::coordinate(int k) const
{
    check_index(k);
    return a_ + (b_ - a_) * k / static_cast<double>(1 << depth_);
}

int MacrogridHierarchy::level(int k) const
{
    check_index(k);
    if (k == 0) return 1;
    return std::max(1, depth_ - std::countr_zero(static_cast<unsigned>(k)));
}

int MacrogridHierarchy::level(int k1, int k2) const { return std::max(level(k1), level(k2)); }

int MacrogridHierarchy::ancestor(int k) const
{
    const int l = level(k);
    if (l == 1) throw InvalidArgument("hierarchy: level-1 points have no ancestor");
    return k - (1 << (depth_ - l));
}

std::array<int, 2> MacrogridHierarchy::ancestor(int k1, int k2) const
{
    const int l = level(k1, k2);
    if (l == 1) throw InvalidArgument("hierarchy: level-1 points have no ancestor");
    const int step = 1 << (depth_ - l);
    return {level(k1) == l ? k1 - step : k1, level(k2) == l ? k2 - step : k2};
}

std::vector<int> MacrogridHierarchy::points(int l) const
{
    std::vector<int> out;
    for (int k = 0; k < size(); ++k)
        if (level(k) == l) out.push_back(k);
    return out;
}

std::vector<std::array<int, 2>> MacrogridHierarchy::points2(int l) const
{
    std::vector<std::array<int, 2>> out;
    for (int k1 = 0; k1 < size(); ++k1)
        for (int k2 = 0; k2 < size(); ++k2)
            if (level(k1, k2) == l) out.push_back({k1, k2});
    return out;
}

MacrogridHierarchy build_hierarchy(double a, double b, int depth) { return MacrogridHierarchy(a, b, depth); }

// ---------------------------------------------------------------------------

SparseMatrix periodic_prolongation(int n, int ratio)
{
    if (n < 1 || ratio < 1) throw InvalidArgument("periodic prolongation: sizes must be positive");
    const int nf = n * ratio;
    std::vector<Eigen::Triplet<double>> t;
    for (int jf = 0; jf < nf; ++jf)
        for (int i_f = 0; i_f < nf; ++i_f) {
            const int i0 = i_f / ratio, j0 = jf / ratio;
            const double s = static_cast<double>(i_f % ratio) / ratio;
            const double r = static_cast<double>(jf % ratio) / ratio;
            const int i1 = (i0 + 1) % n, j1 = (j0 + 1) % n;
            const int row = jf * nf + i_f;
            const std::array<std::pair<int, double>, 4> w{{{j0 * n + i0, (1 - s) * (1 - r)},
                                                            {j0 * n + i1, s * (1 - r)},
                                                            {j1 * n + i0, (1 - s) * r},
                                                            {j1 * n + i1, s * r}}};
            for (const auto& [col, v] : w)
                if (v != 0.0) t.emplace_back(row, col, v);
        }
    SparseMatrix p(nf * nf, n * n);
    p.setFromTriplets(t.begin(), t.end());
    return p;
}

std::int64_t space_dofs(int m) { return std::int64_t{1} << (2 * m); }

SpaceLadder::SpaceLadder(int depth)
{
    if (depth < 1 || depth > 12) throw InvalidArgument("space ladder: depth must be in 1..12");
    for (int m = 1; m <= depth; ++m) meshes_.emplace_back(1 << m);
    for (int m = 1; m <= depth; ++m) prolong_.push_back(periodic_prolongation(1 << m, 1 << (depth - m)));
}

const UnitCellMesh& SpaceLadder::mesh(int m) const
{
    if (m < 1 || m > depth()) throw InvalidArgument("space ladder: level " + std::to_string(m) + " out of range");
    return meshes_[static_cast<std::size_t>(m - 1)];
}

const SparseMatrix& SpaceLadder::prolongation(int m) const
{
    if (m < 1 || m > depth()) throw InvalidArgument("space ladder: level " + std::to_string(m) + " out of range");
    return prolong_[static_cast<std::size_t>(m - 1)];
}

// ---------------------------------------------------------------------------

std::string CellProblem::name() const
{
    if (kind == Kind::N)
        return "N(direction " + std::to_string(direction + 1) + ", continuum " + std::to_string(continuum + 1) + ")";
    return "M(continuum " + std::to_string(continuum + 1) + ")";
}

int HierSolutionTable::position(int k1, int k2) const
{
    const int n = (1 << depth) + 1;
    if (k1 < 0 || k1 >= n) throw InvalidArgument("solution table: index out of range");
    if (problem.parameter_dim() == 1) {
        if (k2 != -1) throw InvalidArgument("solution table: 1D table addressed with two indices");
        return k1;
    }
    if (k2 < 0 || k2 >= n) throw InvalidArgument("solution table: index out of range");
    return k1 * n + k2;
}

namespace {

struct PointSystem {
    SparseMatrix k;
    Vector f;
};

void check_problem(const CellProblem& problem)
{
    if (problem.continuum < 0 || problem.continuum > 1) throw InvalidArgument("cell problem: continuum must be 0 or 1");
    if (problem.kind == CellProblem::Kind::N && (problem.direction < 0 || problem.direction > 1))
        throw InvalidArgument("cell problem: direction must be 0 or 1");
}

PointSystem point_system(const CellModel& model, const UnitCellMesh& mesh, const CellProblem& problem,
                         const std::array<double, 2>& p, MeanPolicy policy)
{
    const int c = problem.continuum;
    const double pc = problem.kind == CellProblem::Kind::N ? p[0] : p[static_cast<std::size_t>(c)];
    const QuadField k = mesh.sample([&](Point y) { return model.k(c, y, pc); });
    if (!(k.min() > 0.0)) throw InvalidArgument("cell conductivity must be positive at p = " + std::to_string(pc));
    PointSystem s;
    s.k = assemble_stiffness(mesh.grid(), k, &mesh.dofs());
    if (problem.kind == CellProblem::Kind::N) {
        s.f = cell_n_rhs(mesh, k, problem.direction);
    } else {
        const QuadField q = mesh.sample([&](Point y) { return model.eval_q(c, y, p[0], p[1]); });
        s.f = cell_m_rhs(mesh, q, policy);
    }
    return s;
}

double weak_residual(const PointSystem& s, const SparseMatrix* p, const Vector& u)
{
    Vector r = s.k * u - s.f;
    double scale = s.f.norm();
    if (p) {
        r = p->transpose() * r;
        scale = std::max(scale, (p->transpose() * s.f).norm());
    }
    scale = std::max(scale, 1e-14 * s.k.norm());
    return scale > 0.0 ? r.norm() / scale : r.norm();
}

HierSolutionTable empty_table(const MacrogridHierarchy& h, const CellProblem& problem)
{
    check_problem(problem);
    HierSolutionTable t;
    t.problem = problem;
    t.depth = h.depth();
    const int n = h.size();
    if (problem.parameter_dim() == 1) {
        for (int k = 0; k < n; ++k) {
            HierEntry e;
            e.index = {k, -1};
            e.p = {h.coordinate(k), h.coordinate(k)};
            e.level = h.level(k);
            t.entries.push_back(std::move(e));
        }
    } else {
        for (int k1 = 0; k1 < n; ++k1)
            for (int k2 = 0; k2 < n; ++k2) {
                HierEntry e;
                e.index = {k1, k2};
                e.p = {h.coordinate(k1), h.coordinate(k2)};
                e.level = h.level(k1, k2);
                t.entries.push_back(std::move(e));
            }
    }
    return t;
}

void solve_anchor(const CellModel& model, const SpaceLadder& ladder, const CellProblem& problem, HierEntry& e,
                  MeanPolicy policy)
{
    const UnitCellMesh& fine = ladder.finest();
    const PointSystem s = point_system(model, fine, problem, e.p, policy);
    e.space = ladder.depth();
    e.ancestor = -1;
    e.solution = solve_periodic(fine, s.k, s.f);
    e.residual = weak_residual(s, nullptr, e.solution);
}

}  // namespace

HierSolutionTable hierarchical_cell_solve(const CellModel& model, const MacrogridHierarchy& hierarchy,
                                          const SpaceLadder& ladder, const CellProblem& problem, MeanPolicy policy)
{
    if (ladder.depth() != hierarchy.depth())
        throw InvalidArgument("hierarchical solve: ladder depth " + std::to_string(ladder.depth()) +
                              " differs from hierarchy depth " + std::to_string(hierarchy.depth()));
    HierSolutionTable t = empty_table(hierarchy, problem);
    const int depth = hierarchy.depth();
    const UnitCellMesh& fine = ladder.finest();

    for (int l = 1; l <= depth; ++l) {
        std::vector<std::size_t> todo;
        for (std::size_t i = 0; i < t.entries.size(); ++i)
            if (t.entries[i].level == l) todo.push_back(i);
        parallel_for(todo.size(), [&](std::size_t idx) {
            HierEntry& e = t.entries[todo[idx]];
            if (l == 1) {
                solve_anchor(model, ladder, problem, e, policy);
                return;
            }
            int anc;
            if (problem.parameter_dim() == 1) {
                anc = t.position(hierarchy.ancestor(e.index[0]));
            } else {
                const auto a = hierarchy.ancestor(e.index[0], e.index[1]);
                anc = t.position(a[0], a[1]);
            }
            const HierEntry& parent = t.entries[static_cast<std::size_t>(anc)];
            if (parent.level >= l || parent.solution.size() != fine.num_dofs())
                throw InvariantViolation("hierarchical solve: ancestor of a level-" + std::to_string(l) +
                                         " point is not solved");
            const int m = depth + 1 - l;
            const SparseMatrix& p = ladder.prolongation(m);
            const PointSystem here = point_system(model, fine, problem, e.p, policy);
            const PointSystem there = point_system(model, fine, problem, parent.p, policy);
            // right side built from the coefficient differences and the stored ancestor solution
            const Vector rhs_fine = (here.f - there.f) - (here.k * parent.solution - there.k * parent.solution);
            const SparseMatrix a = SparseMatrix(p.transpose()) * here.k * p;
            const Vector corr = solve_periodic(ladder.mesh(m), a, p.transpose() * rhs_fine);
            e.space = m;
            e.ancestor = anc;
            e.solution = fine.remove_mean(p * corr + parent.solution);
            e.residual = weak_residual(here, &p, e.solution);
        });
    }
    return t;
}

HierSolutionTable full_cell_solve(const CellModel& model, const MacrogridHierarchy& hierarchy,
                                  const SpaceLadder& ladder, const CellProblem& problem, MeanPolicy policy)
{
    if (ladder.depth() != hierarchy.depth())
        throw InvalidArgument("full solve: ladder depth differs from hierarchy depth");
    HierSolutionTable t = empty_table(hierarchy, problem);
    parallel_for(t.entries.size(), [&](std::size_t i) { solve_anchor(model, ladder, problem, t.entries[i], policy); });
    return t;
}

std::int64_t dof_count(const MacrogridHierarchy& hierarchy, DofMode mode, int parameter_dim)
{
    if (parameter_dim != 1 && parameter_dim != 2) throw InvalidArgument("dof count: parameter dimension must be 1 or 2");
    const int depth = hierarchy.depth();
    if (mode == DofMode::Full) {
        const std::int64_t n = hierarchy.size();
        return (parameter_dim == 1 ? n : n * n) * space_dofs(depth);
    }
    std::int64_t total = 0;
    for (int l = 1; l <= depth; ++l) {
        const std::int64_t count = parameter_dim == 1 ? static_cast<std::int64_t>(hierarchy.points(l).size())
                                                      : static_cast<std::int64_t>(hierarchy.points2(l).size());
        total += count * space_dofs(depth + 1 - l);
    }
    return total;
}

ConvergenceReport convergence_report(const HierSolutionTable& table, const HierSolutionTable& reference,
                                     const SpaceLadder& ladder)
{
    if (table.depth != reference.depth || table.entries.size() != reference.entries.size() ||
        table.problem.kind != reference.problem.kind)
        throw InvalidArgument("convergence report: tables cover different macrogrids");
    if (ladder.depth() != table.depth) throw InvalidArgument("convergence report: ladder depth mismatch");
    ConvergenceReport rep;
    rep.depth = table.depth;
    for (int l = 1; l <= table.depth; ++l) {
        LevelReport r;
        r.level = l;
        r.space = table.depth + 1 - l;
        r.space_dofs = space_dofs(r.space);
        rep.levels.push_back(r);
    }
    const UnitCellMesh& fine = ladder.finest();
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const HierEntry& e = table.entries[i];
        const HierEntry& ref = reference.entries[i];
        if (e.index != ref.index) throw InvalidArgument("convergence report: tables cover different macrogrids");
        LevelReport& r = rep.levels[static_cast<std::size_t>(e.level - 1)];
        ++r.points;
        r.max_error = std::max(r.max_error, fine.gradient_norm(ref.solution - e.solution));
    }
    const double h = std::ldexp(1.0, -table.depth);
    for (const LevelReport& r : rep.levels) rep.fitted_constant = std::max(rep.fitted_constant, r.max_error / (r.level * h));
    return rep;
}

}  // namespace dcflow
