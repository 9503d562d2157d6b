// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--known-failure N]... [--work DIR]
//
// Exits 0 when every failing criterion is listed as a known failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/QR>

#include "dcflow/experiment.hpp"
#include "dcflow/gmsfem.hpp"
#include "dcflow/hier.hpp"
#include "dcflow/homogenize.hpp"

using namespace dcflow;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    std::vector<std::string> lines;
    bool passed = true;

    void check(bool ok, const std::string& what)
    {
        lines.push_back((ok ? "ok    " : "FAIL  ") + what);
        passed = passed && ok;
    }
};

std::string fmt(double v, int prec = 4)
{
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double span_distance(const Matrix& a, const Matrix& b)
{
    const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
    return std::max((qa - qb * (qb.transpose() * qa)).norm(), (qb - qa * (qa.transpose() * qb)).norm());
}

// ---------------------------------------------------------------------------

Outcome table_trends(const fs::path& work)
{
    Outcome o;
    ExperimentConfig c;
    c.output_dir = (work / "table").string();
    c.write_fields = true;
    const auto t0 = std::chrono::steady_clock::now();
    const ErrorReport r = run_experiment(c, &std::cerr);
    const double secs = seconds_since(t0);

    for (SolverMode m : {SolverMode::Coupled, SolverMode::Uncoupled}) {
        std::string line = "      " + to_string(m) + " p1/p2 %:";
        for (int d : c.dims) {
            const ErrorRow& row = r.row(m, d);
            line += " " + std::to_string(d) + "=" + fmt(row.error_percent[0]) + "/" + fmt(row.error_percent[1]);
        }
        o.lines.push_back(line);
    }
    for (const TrendCheck& t : check_table_trends(r))
        o.check(t.passed, t.detail.empty() ? t.name : t.name + " (" + t.detail + ")");

    // final p2 of the coupled dim-1800 run against the fine reference
    const ElementField ref = import_field((fs::path(c.output_dir) / "reference_p2.txt").string());
    const ElementField ms = import_field((fs::path(c.output_dir) / "coupled_1800_p2.txt").string());
    const double range = ref.max() - ref.min();
    const bool bracket =
        std::abs(ms.max() - ref.max()) <= 0.05 * range && std::abs(ms.min() - ref.min()) <= 0.05 * range;
    o.check(bracket, "coupled 1800 p2 range [" + fmt(ms.min()) + ", " + fmt(ms.max()) + "] vs reference [" +
                         fmt(ref.min()) + ", " + fmt(ref.max()) + "] within 5%");
    o.check(secs <= 900.0, "runtime " + fmt(secs, 3) + " s <= 900 s");
    return o;
}

// ---------------------------------------------------------------------------

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

Outcome fem_order()
{
    Outcome o;
    const std::vector<int> ns{8, 16, 32, 64};
    std::vector<double> err;
    for (int n : ns) err.push_back(poisson_error(n));
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double order = std::log2(err[k - 1] / err[k]);
        o.check(order >= 1.9, "order " + fmt(order) + " from h=1/" + std::to_string(ns[k - 1]) + " to 1/" +
                                  std::to_string(ns[k]) + " (>= 1.9)");
    }
    return o;
}

// ---------------------------------------------------------------------------

Outcome homogenization()
{
    Outcome o;
    const UnitCellMesh mesh(128);
    auto tensor = [&](const std::function<double(Point)>& k, double& mean1) {
        const QuadField kq = mesh.sample(k);
        const Vector n1 = solve_cell_N(mesh, kq, 0), n2 = solve_cell_N(mesh, kq, 1);
        mean1 = std::max(std::abs(mesh.mean(n1)), std::abs(mesh.mean(n2)));
        return effective_tensor(mesh, kq, n1, n2);
    };
    double mean = 0.0;
    const EffectiveTensor lam = tensor([](Point y) { return y.x < 0.5 ? 1.0 : 4.0; }, mean);
    const double e11 = std::abs(lam.value(0, 0) - 1.6) / 1.6, e22 = std::abs(lam.value(1, 1) - 2.5) / 2.5;
    o.check(e11 <= 1e-3 && e22 <= 1e-3, "laminate K11 " + fmt(lam.value(0, 0), 8) + ", K22 " +
                                            fmt(lam.value(1, 1), 8) + " (1e-3 relative)");
    o.check(mean <= 1e-10, "laminate cell solutions mean " + fmt(mean, 3));

    const EffectiveTensor sn = tensor([](Point y) { return 2.0 + std::sin(2 * pi * y.x); }, mean);
    o.check(std::abs(sn.value(0, 0) - std::sqrt(3.0)) <= 1e-3 * std::sqrt(3.0),
            "2 + sin: K11 " + fmt(sn.value(0, 0), 8) + " vs sqrt(3) (1e-3 relative)");
    o.check(mean <= 1e-10, "2 + sin cell solutions mean " + fmt(mean, 3));

    std::vector<double> err;
    double worst_mean = 0.0;
    for (int n : {32, 64, 128}) {
        const UnitCellMesh m(n);
        auto q = [](Point y) { return std::cos(2 * pi * y.x); };
        const Vector sol = solve_cell_M(m, m.sample([](Point) { return 1.0; }), m.sample(q));
        worst_mean = std::max(worst_mean, std::abs(m.mean(sol)));
        const QuadField d = QuadField::from_nodal(m.grid(), m.nodal(sol), 4) +
                            -1.0 * m.sample([&](Point y) { return q(y) / (4 * pi * pi); }, 4);
        err.push_back(std::sqrt(integrate(m.grid(), d * d)));
    }
    const double order = std::log2(err[1] / err[2]);
    o.check(order >= 1.9 && err[2] <= 1e-4,
            "M for Q = cos: L2 error " + fmt(err[2], 3) + " at 128, order " + fmt(order) + " (O(h^2))");
    o.check(worst_mean <= 1e-10, "M mean " + fmt(worst_mean, 3));
    return o;
}

// ---------------------------------------------------------------------------

std::int64_t hier_closed_form(int L, int d)
{
    auto pts = [&](int l) -> std::int64_t {
        const std::int64_t n = (std::int64_t{1} << l) + 1;
        const std::int64_t m = (std::int64_t{1} << (l - 1)) + 1;
        if (d == 1) return l == 1 ? 3 : n - m;
        return l == 1 ? 9 : n * n - m * m;
    };
    std::int64_t total = 0;
    for (int l = 1; l <= L; ++l) total += pts(l) * space_dofs(L + 1 - l);
    return total;
}

std::int64_t full_closed_form(int L, int d)
{
    const std::int64_t n = (std::int64_t{1} << L) + 1;
    return (d == 1 ? n : n * n) * space_dofs(L);
}

Outcome hierarchical()
{
    Outcome o;
    const CellModel model = lipschitz_cell_model();
    CellProblem n11, m1;
    m1.kind = CellProblem::Kind::M;
    const auto t0 = std::chrono::steady_clock::now();
    for (const CellProblem& pr : {n11, m1}) {
        std::vector<double> cs;
        bool bound = true, dofs = true, fewer = true;
        for (int L : {3, 4, 5}) {
            const HierBenchResult r = run_hier_bench(model, L, pr);
            cs.push_back(r.fitted_constant);
            for (const HierBenchRow& row : r.rows)
                bound = bound && row.max_error <= r.fitted_constant * row.level / double(1 << L) * (1 + 1e-12);
            const int d = pr.parameter_dim();
            dofs = dofs && r.hierarchical_dofs == hier_closed_form(L, d) && r.full_dofs == full_closed_form(L, d);
            fewer = fewer && r.hierarchical_dofs < r.full_dofs;
        }
        const double ratio = *std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end());
        o.check(bound && ratio < 2.0, pr.name() + ": err(l) <= C l 2^-L with C = " + fmt(cs[0]) + "/" + fmt(cs[1]) +
                                          "/" + fmt(cs[2]) + " for L=3/4/5, spread " + fmt(ratio, 3) + " (< 2)");
        o.check(dofs && fewer, pr.name() + ": DOF counts match closed forms, hierarchical < full");
    }
    bool all_fewer = true;
    for (int L = 2; L <= 12; ++L) {
        const MacrogridHierarchy h = build_hierarchy(0.0, 1.0, L);
        for (int d : {1, 2})
            all_fewer = all_fewer && dof_count(h, DofMode::Hierarchical, d) < dof_count(h, DofMode::Full, d) &&
                        dof_count(h, DofMode::Hierarchical, d) == hier_closed_form(L, d);
    }
    const MacrogridHierarchy h3 = build_hierarchy(0.0, 1.0, 3);
    o.check(all_fewer && dof_count(h3, DofMode::Hierarchical, 1) == 240 && dof_count(h3, DofMode::Full, 1) == 576,
            "L=3 1D: 240 vs 576; hierarchical < full for L = 2..12");
    const double secs = seconds_since(t0);
    o.check(secs <= 300.0, "runtime " + fmt(secs, 3) + " s <= 300 s");
    return o;
}

// ---------------------------------------------------------------------------

Outcome picard()
{
    Outcome o;
    TimeSteppingConfig cfg;

    {
        const StructuredGrid g = build_fine_grid(32, 32);
        CoefficientModel m = test_problem(32, 32);
        m.pressure_dependent = false;
        m.transfer_pressure_dependent = false;
        m.convection_scale = 0.0;
        const FlowProblem lin(g, m);
        TimeSteppingConfig one = cfg;
        one.final_time = one.step;
        const StepResult r = picard_step(lin, FineSpace{}, DualPressure::zero(g), one);
        o.check(r.trace.iterations == 2 && r.trace.differences[1][0] == 0.0 && r.trace.differences[1][1] == 0.0,
                "linear coefficients: accepted at iterate " + std::to_string(r.trace.iterations) +
                    " with zero difference");
    }

    const StructuredGrid g = build_fine_grid(128, 128);
    const FlowProblem problem(g, test_problem(128, 128));
    int worst_it = 0;
    double worst_res = 0.0;
    const SimulationResult sim = run_simulation(problem, FineSpace{}, cfg);
    for (const PicardStepTrace& s : sim.steps) {
        worst_it = std::max(worst_it, s.iterations);
        worst_res = std::max(worst_res, s.residual);
    }
    o.check(sim.steps.size() == 20 && worst_it <= 50,
            std::to_string(sim.steps.size()) + " steps converged, at most " + std::to_string(worst_it) +
                " iterations (<= 50)");
    o.check(worst_res <= 10 * cfg.tolerance, "nonlinear residual " + fmt(worst_res, 3) + " <= 1e-4");

    // increments below about 1e-11 are linear-solver noise
    TimeSteppingConfig tight = cfg;
    tight.tolerance = 1e-8;
    const std::vector<double> lam = contraction_estimate(problem, FineSpace{}, tight, {0.1, 0.05});
    o.check(lam[0] < 1.0 && lam[1] < 1.0 && lam[1] <= lam[0],
            "contraction " + fmt(lam[0]) + " at tau=0.1, " + fmt(lam[1]) + " at tau=0.05");
    return o;
}

// ---------------------------------------------------------------------------

Outcome properties()
{
    Outcome o;
    {
        const StructuredGrid fine = build_fine_grid(64, 64);
        const NestedGrids grids = build_coarse_grid(fine, 8);
        const FrozenCoefficients fc = FlowProblem(fine, test_problem(64, 64)).freeze(DualPressure::zero(fine));
        const PartitionOfUnity pou = partition_of_unity(grids, fc.kappa[0], PouMode::Multiscale);
        const double dev = (pou.sum().array() - 1.0).abs().maxCoeff();
        o.check(dev <= 1e-12, "partition of unity sum deviation " + fmt(dev, 3) + " (1e-12)");

        const Vector p = Vector::LinSpaced(fine.num_nodes(), 0.0, 1.0);
        const CouplingBlocks cb = assemble_coupling(fine, fc.c[0]);
        const double q = Vector(cb.self * p + cb.cross * p).cwiseAbs().maxCoeff();
        o.check(q <= 1e-9 * Matrix(cb.self).cwiseAbs().maxCoeff(), "coupling form at p1 = p2: " + fmt(q, 3));
    }

    const StructuredGrid fine = build_fine_grid(32, 32);
    const NestedGrids grids = build_coarse_grid(fine, 4);
    const FlowProblem problem(fine, test_problem(32, 32));
    const FrozenCoefficients fc = problem.freeze(DualPressure::zero(fine));
    const CoarseNeighborhood nb = coarse_neighborhood(grids, grids.coarse.node(2, 2));
    const int np = nb.patch.size();

    const SnapshotSpace un = uncoupled_snapshots(grids, nb, fc.kappa[0], 0);
    const QuadField cs = 0.5 * (fc.c[0] + fc.c[1]);
    const SnapshotSpace co = coupled_snapshots(grids, nb, fc.kappa[0], fc.kappa[1], cs);
    const int nbnd = static_cast<int>(un.boundary_local.size());
    bool exact = true;
    for (int c = 0; c < nbnd; ++c)
        for (int b = 0; b < nbnd; ++b) {
            exact = exact && un.vectors(un.boundary_local[b], c) == (b == c ? 1.0 : 0.0);
            for (int r = 0; r < 2; ++r)
                for (int s = 0; s < 2; ++s)
                    exact = exact && co.vectors(s * np + co.boundary_local[b], r * nbnd + c) ==
                                         (r == s && b == c ? 1.0 : 0.0);
        }
    o.check(exact, "snapshot boundary data exact (uncoupled and coupled)");

    const std::array<PartitionOfUnity, 2> pou{partition_of_unity(grids, fc.kappa[0], PouMode::Multiscale),
                                              partition_of_unity(grids, fc.kappa[1], PouMode::Multiscale)};
    const std::array<QuadField, 2> w{spectral_weight(pou[0], fc.kappa[0]), spectral_weight(pou[1], fc.kappa[1])};
    const EigenPairs ep = spectral_decompose(grids, co, fc.kappa, w, co.size());
    bool ascending = ep.values[0] >= -1e-10;
    for (int k = 1; k < ep.values.size(); ++k) ascending = ascending && ep.values[k] >= ep.values[k - 1];
    const StructuredGrid pg = patch_grid(fine, nb.patch);
    auto local = [&](const QuadField& f) { return f.restricted(fine.nx(), nb.patch.i0, nb.patch.j0, pg.nx(), pg.ny()); };
    const Matrix s0 = Matrix(assemble_mass(pg, local(w[0]))), s1 = Matrix(assemble_mass(pg, local(w[1])));
    Matrix s = Matrix::Zero(2 * np, 2 * np);
    s.topLeftCorner(np, np) = s0;
    s.bottomRightCorner(np, np) = s1;
    const Matrix gram = ep.vectors.transpose() * s * ep.vectors;
    const double orth = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    o.check(ascending && orth <= 1e-8, "eigenvalues ascending, S-orthonormality defect " + fmt(orth, 3));

    const SnapshotSpace c0 = coupled_snapshots(grids, nb, fc.kappa[0], fc.kappa[1], QuadField(fine, 2, 0.0));
    const SnapshotSpace u1 = uncoupled_snapshots(grids, nb, fc.kappa[1], 1);
    const double gap = std::max(span_distance(c0.vectors.block(0, 0, np, nbnd), un.vectors),
                                span_distance(c0.vectors.block(np, nbnd, np, nbnd), u1.vectors));
    o.check(gap <= 1e-8, "coupled snapshots at c_s = 0 span the uncoupled ones, gap " + fmt(gap, 3));

    {
        CoefficientModel m = test_problem(24, 24);
        m.convection_scale = 0.0;
        m.source = {0.0, 0.0};
        const StructuredGrid g = build_fine_grid(24, 24);
        const FlowProblem diss(g, m);
        DualPressure init = DualPressure::zero(g);
        for (int k = 0; k < g.num_nodes(); ++k)
            if (!g.is_boundary_node(k)) {
                const Point x = g.node_point(k);
                init.p1[k] = std::sin(pi * x.x) * std::sin(2 * pi * x.y);
                init.p2[k] = 0.5 * std::sin(3 * pi * x.x) * std::sin(pi * x.y);
            }
        auto energy = [&](const DualPressure& st) {
            return std::pow(diss.l2_norm(st.p1), 2) + std::pow(diss.l2_norm(st.p2), 2);
        };
        TimeSteppingConfig cfg;
        cfg.final_time = 0.5;
        double last = energy(init);
        bool decreasing = true;
        run_simulation(diss, FineSpace{}, cfg, init, [&](const DualPressure& st, const PicardStepTrace&) {
            const double e = energy(st);
            decreasing = decreasing && e < last;
            last = e;
        });
        o.check(decreasing, "energy decreases every step without convection and sources");
    }

    {
        const StructuredGrid g = build_fine_grid(8, 8);
        const NestedGrids tiny = build_coarse_grid(g, 2);
        const FlowProblem tp(g, test_problem(8, 8));
        TimeSteppingConfig cfg;
        cfg.final_time = 0.3;
        const SimulationResult ref = run_simulation(tp, FineSpace{}, cfg);
        double worst = 0.0;
        for (BasisMode mode : {BasisMode::Coupled, BasisMode::Uncoupled}) {
            OfflineOptions opt;
            opt.mode = mode;
            opt.snapshots = SnapshotKind::LocalFine;
            opt.max_per_node = mode == BasisMode::Coupled ? 2 * g.num_nodes() : g.num_nodes();
            const OfflineBasis ob = build_offline_basis(tp, tiny, DualPressure::zero(g), opt);
            const SimulationResult got = run_simulation(tp, build_multiscale_space(ob, opt.max_per_node), cfg);
            worst = std::max({worst, (got.final_state.p1 - ref.final_state.p1).norm() / ref.final_state.p1.norm(),
                              (got.final_state.p2 - ref.final_state.p2).norm() / ref.final_state.p2.norm()});
        }
        o.check(worst <= 1e-8, "full offline space on 8x8 / 2x2 matches the fine solve, " + fmt(worst, 3));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"dcflow acceptance checks"};
    std::vector<int> only, known;
    std::string work = (fs::temp_directory_path() / "dcflow-acceptance").string();
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 6));
    app.add_option("--known-failure", known, "criteria allowed to fail")->check(CLI::Range(1, 6));
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"table trends on the 128x128 benchmark", [&] { return table_trends(work); }},
        {"FEM convergence order", fem_order},
        {"homogenization oracles", homogenization},
        {"hierarchical cell solves", hierarchical},
        {"Picard iteration", picard},
        {"property suites", properties},
    };

    fs::create_directories(work);
    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("error: ") + e.what());
        }
        const bool expected = std::find(known.begin(), known.end(), id) != known.end();
        std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " ["
                  << fmt(seconds_since(t0), 3) << " s]" << (!o.passed && expected ? " (known failure)" : "") << "\n";
        for (const std::string& l : o.lines) std::cout << "    " << l << "\n";
        std::cout.flush();
        if (!o.passed) failed.insert(id);
    }
    for (int id : failed)
        if (std::find(known.begin(), known.end(), id) == known.end()) return 1;
    return 0;
}
