#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "dcflow/time_picard.hpp"

namespace dcflow {

DualPressure DualPressure::zero(const StructuredGrid& grid)
{
    return {Vector::Zero(grid.num_nodes()), Vector::Zero(grid.num_nodes()), 0.0};
}

Vector DualPressure::stacked() const
{
    Vector x(p1.size() + p2.size());
    x << p1, p2;
    return x;
}

DualPressure DualPressure::from_stacked(const Vector& x, double t)
{
    const Eigen::Index n = x.size() / 2;
    return {x.head(n), x.tail(n), t};
}

int TimeSteppingConfig::steps() const
{
    validate();
    const double s = final_time / step;
    const long r = std::lround(s);
    if (r < 1 || std::abs(s - static_cast<double>(r)) > 1e-9 * std::max(1.0, s))
        throw InvalidArgument("final time " + std::to_string(final_time) + " is not a whole number of steps of " +
                              std::to_string(step));
    return static_cast<int>(r);
}

void TimeSteppingConfig::validate() const
{
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("time step must be positive");
    if (!(final_time > 0.0) || !std::isfinite(final_time)) throw InvalidArgument("final time must be positive");
    if (!(tolerance > 0.0)) throw InvalidArgument("Picard tolerance must be positive");
    if (max_iterations < 1) throw InvalidArgument("max Picard iterations must be at least 1");
}

// ---------------------------------------------------------------------------

FlowProblem::FlowProblem(StructuredGrid grid, CoefficientModel model, int quadrature_order)
    : grid_(std::move(grid)), model_(std::move(model)), order_(quadrature_order)
{
    for (const auto& a : model_.permeability)
        if (a.nx != grid_.nx() || a.ny != grid_.ny())
            throw InvalidArgument("permeability field does not match the grid");
    mass_ = assemble_mass(grid_, QuadField(grid_, order_, 1.0));
    const auto bm = grid_.boundary_mask();
    mask_.resize(2 * bm.size());
    std::copy(bm.begin(), bm.end(), mask_.begin());
    std::copy(bm.begin(), bm.end(), mask_.begin() + static_cast<std::ptrdiff_t>(bm.size()));
}

FrozenCoefficients FlowProblem::freeze(const DualPressure& p) const
{
    return eval_coefficients(model_, grid_, p.p1, p.p2, order_);
}

SparseMatrix FlowProblem::block_operator(const StructuredGrid& grid, const FrozenCoefficients& fc, double tau)
{
    const int n = grid.num_nodes();
    const QuadratureRule& rule = fc.kappa[0].rule();
    const int nq = rule.size();
    for (int i = 0; i < 2; ++i)
        if (fc.kappa[i].num_elements() != grid.num_elements())
            throw InvalidArgument("block_operator: coefficients do not match the grid");

    std::vector<std::array<double, 4>> phi(nq);
    std::vector<std::array<std::array<double, 2>, 4>> grad(nq);
    std::vector<double> jw(nq);
    for (int q = 0; q < nq; ++q) {
        phi[q] = q1_values(rule.xi[q], rule.eta[q]);
        grad[q] = q1_gradients(rule.xi[q], rule.eta[q], grid.hx(), grid.hy());
        jw[q] = rule.weight[q] * grid.hx() * grid.hy();
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(grid.num_elements()) * 64);
    double ke[2][2][4][4];
    const double inv_tau = 1.0 / tau;
    for (int e = 0; e < grid.num_elements(); ++e) {
        std::fill(&ke[0][0][0][0], &ke[0][0][0][0] + 64, 0.0);
        for (int q = 0; q < nq; ++q) {
            const auto& f = phi[q];
            const auto& g = grad[q];
            for (int i = 0; i < 2; ++i) {
                const double k = fc.kappa[i](e, q) * jw[q];
                const double c = fc.c[i](e, q) * jw[q];
                const double m = inv_tau * jw[q];
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b) {
                        const double ff = f[a] * f[b];
                        ke[i][i][a][b] += k * (g[a][0] * g[b][0] + g[a][1] * g[b][1]) + (m + c) * ff;
                        ke[i][1 - i][a][b] -= c * ff;
                    }
                for (int j = 0; j < 2; ++j) {
                    const double bx = fc.bx[i][j](e, q) * jw[q];
                    const double by = fc.by[i][j](e, q) * jw[q];
                    if (bx == 0.0 && by == 0.0) continue;
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b) ke[i][j][a][b] += f[a] * (bx * g[b][0] + by * g[b][1]);
                }
            }
        }
        const auto nodes = grid.element_nodes(e);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        if (ke[i][j][a][b] != 0.0) trip.emplace_back(i * n + nodes[a], j * n + nodes[b], ke[i][j][a][b]);
    }
    SparseMatrix a(2 * n, 2 * n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

Vector FlowProblem::rhs(const FrozenCoefficients& fc, const DualPressure& old, double tau) const
{
    const int n = num_nodes();
    Vector b(2 * n);
    b.head(n) = mass_ * old.p1 / tau + assemble_load(grid_, fc.f[0]);
    b.tail(n) = mass_ * old.p2 / tau + assemble_load(grid_, fc.f[1]);
    return b;
}

double FlowProblem::l2_norm(const Vector& v) const
{
    return std::sqrt(std::max(0.0, v.dot(mass_ * v)));
}

FrozenCoefficients restrict_coefficients(const FrozenCoefficients& fc, int parent_nx, int ei0, int ej0, int nx, int ny)
{
    FrozenCoefficients out;
    auto r = [&](const QuadField& f) { return f.restricted(parent_nx, ei0, ej0, nx, ny); };
    for (int i = 0; i < 2; ++i) {
        out.kappa[i] = r(fc.kappa[i]);
        out.c[i] = r(fc.c[i]);
        out.f[i] = r(fc.f[i]);
        for (int j = 0; j < 2; ++j) {
            out.bx[i][j] = r(fc.bx[i][j]);
            out.by[i][j] = r(fc.by[i][j]);
        }
    }
    return out;
}

Vector FineSpace::solve(const FlowProblem& problem, const FrozenCoefficients& fc, const Vector& rhs, double tau) const
{
    SparseMatrix a = FlowProblem::block_operator(problem.grid(), fc, tau);
    Vector b = rhs;
    apply_dirichlet(a, &b, problem.dirichlet_mask());
    return solve_sparse(a, b);
}

Vector FineSpace::project(const FlowProblem& problem, const Vector& fine) const
{
    Vector out = fine;
    const auto& mask = problem.dirichlet_mask();
    for (Eigen::Index k = 0; k < out.size(); ++k)
        if (mask[static_cast<std::size_t>(k)]) out[k] = 0.0;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double norm_of(const Vector& v, const SparseMatrix* mass)
{
    return mass ? std::sqrt(std::max(0.0, v.dot(*mass * v))) : v.norm();
}

double relative(double diff, double old)
{
    if (old == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / old;
}

}  // namespace

std::array<double, 2> relative_differences(const DualPressure& p_new, const DualPressure& p_old,
                                           const SparseMatrix* mass)
{
    if (p_new.p1.size() != p_old.p1.size() || p_new.p2.size() != p_old.p2.size())
        throw InvalidArgument("relative_differences: shape mismatch");
    return {relative(norm_of(p_new.p1 - p_old.p1, mass), norm_of(p_old.p1, mass)),
            relative(norm_of(p_new.p2 - p_old.p2, mass), norm_of(p_old.p2, mass))};
}

bool stopping_check(const DualPressure& p_new, const DualPressure& p_old, double tol, const SparseMatrix* mass)
{
    const auto d = relative_differences(p_new, p_old, mass);
    return d[0] <= tol && d[1] <= tol;
}

double nonlinear_residual(const FlowProblem& problem, const SolutionSpace& space, const DualPressure& p,
                          const DualPressure& old, double tau)
{
    const FrozenCoefficients fc = problem.freeze(p);
    const SparseMatrix a = FlowProblem::block_operator(problem.grid(), fc, tau);
    const Vector b = problem.rhs(fc, old, tau);
    const Vector r = space.project(problem, a * p.stacked() - b);
    const double bn = space.project(problem, b).norm();
    return bn > 0.0 ? r.norm() / bn : r.norm();
}

StepResult picard_step(const FlowProblem& problem, const SolutionSpace& space, const DualPressure& state,
                       const TimeSteppingConfig& cfg, int step_index)
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const double tau = cfg.step;
    const double t_new = state.t + tau;

    PicardStepTrace trace;
    trace.step = step_index;
    trace.time = t_new;

    DualPressure current = state;
    current.t = t_new;
    for (int n = 1; n <= cfg.max_iterations; ++n) {
        const FrozenCoefficients fc = problem.freeze(current);
        const Vector b = problem.rhs(fc, state, tau);
        DualPressure next = DualPressure::from_stacked(space.solve(problem, fc, b, tau), t_new);

        const auto d = relative_differences(next, current, &problem.mass());
        trace.differences.push_back(d);
        trace.increments.push_back(
            std::sqrt(std::pow(problem.l2_norm(next.p1 - current.p1), 2) + std::pow(problem.l2_norm(next.p2 - current.p2), 2)));
        current = std::move(next);
        if (d[0] <= cfg.tolerance && d[1] <= cfg.tolerance) {
            trace.iterations = n;
            trace.residual = nonlinear_residual(problem, space, current, state, tau);
            trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return {std::move(current), std::move(trace)};
        }
    }
    trace.iterations = cfg.max_iterations;
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto& last = trace.differences.back();
    throw NonConvergence("Picard iteration did not converge in " + std::to_string(cfg.max_iterations) +
                             " iterations at step " + std::to_string(step_index) + " (last differences " +
                             std::to_string(last[0]) + ", " + std::to_string(last[1]) + ")",
                         std::move(trace));
}

SimulationResult run_simulation(const FlowProblem& problem, const SolutionSpace& space, const TimeSteppingConfig& cfg,
                                std::optional<DualPressure> initial, const StepObserver& observer)
{
    const int steps = cfg.steps();
    DualPressure state = initial ? std::move(*initial) : DualPressure::zero(problem.grid());
    if (state.p1.size() != problem.num_nodes() || state.p2.size() != problem.num_nodes())
        throw InvalidArgument("initial state does not match the grid");
    SimulationResult out;
    out.steps.reserve(steps);
    for (int s = 1; s <= steps; ++s) {
        StepResult r = picard_step(problem, space, state, cfg, s);
        // keep the step time exact rather than accumulating rounding
        r.state.t = s * cfg.step;
        r.trace.time = r.state.t;
        if (observer) observer(r.state, r.trace);
        state = std::move(r.state);
        out.steps.push_back(std::move(r.trace));
    }
    out.final_state = std::move(state);
    return out;
}

double contraction_from_increments(const std::vector<double>& increments)
{
    for (double d : increments)
        if (d == 0.0) return 0.0;
    if (increments.size() < 3)
        throw InsufficientData("contraction estimate needs at least 3 Picard iterations, got " +
                               std::to_string(increments.size()));
    const std::size_t ratios = std::min<std::size_t>(3, increments.size() - 1);
    double log_sum = 0.0;
    for (std::size_t k = increments.size() - ratios; k < increments.size(); ++k)
        log_sum += std::log(increments[k] / increments[k - 1]);
    return std::exp(log_sum / static_cast<double>(ratios));
}

std::vector<double> contraction_estimate(const FlowProblem& problem, const SolutionSpace& space,
                                         const TimeSteppingConfig& cfg, const std::vector<double>& steps)
{
    std::vector<double> out;
    for (double tau : steps) {
        TimeSteppingConfig c = cfg;
        c.step = tau;
        c.final_time = tau;
        const StepResult r = picard_step(problem, space, DualPressure::zero(problem.grid()), c, 1);
        out.push_back(contraction_from_increments(r.trace.increments));
    }
    return out;
}

std::string trace_report_json(const std::vector<PicardStepTrace>& steps, const std::string& space_name)
{
    nlohmann::json j;
    j["space"] = space_name;
    auto& arr = j["steps"] = nlohmann::json::array();
    for (const auto& s : steps) {
        nlohmann::json e;
        e["step"] = s.step;
        e["time"] = s.time;
        e["iterations"] = s.iterations;
        e["residual"] = s.residual;
        e["wall_seconds"] = s.wall_seconds;
        auto& diffs = e["differences"] = nlohmann::json::array();
        for (const auto& d : s.differences) diffs.push_back({d[0], d[1]});
        e["increments"] = s.increments;
        arr.push_back(std::move(e));
    }
    return j.dump(2);
}

}  // namespace dcflow
