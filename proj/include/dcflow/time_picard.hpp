#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcflow/errors.hpp"
#include "dcflow/fem.hpp"
#include "dcflow/grid.hpp"
#include "dcflow/model.hpp"

namespace dcflow {

/// Nodal pressure heads of both continua on the fine grid.
struct DualPressure {
    Vector p1;
    Vector p2;
    double t = 0.0;

    static DualPressure zero(const StructuredGrid& grid);
    Vector stacked() const;
    static DualPressure from_stacked(const Vector& x, double t);
};

struct TimeSteppingConfig {
    double final_time = 2.0;
    double step = 0.1;
    double tolerance = 1e-5;  ///< Picard relative successive-difference threshold
    int max_iterations = 50;

    /// Number of steps S with final_time = S * step; throws when not an integer.
    int steps() const;
    void validate() const;
};

struct PicardStepTrace {
    int step = 0;  ///< 1-based
    double time = 0.0;
    int iterations = 0;  ///< index of the accepted iterate
    /// Relative successive differences per continuum, one entry per iterate.
    std::vector<std::array<double, 2>> differences;
    /// Absolute successive differences of the stacked pair, same indexing.
    std::vector<double> increments;
    /// Relative residual of the nonlinear discrete system at the accepted iterate.
    double residual = 0.0;
    double wall_seconds = 0.0;
};

class NonConvergence : public SolverFailure {
public:
    NonConvergence(const std::string& what, PicardStepTrace trace)
        : SolverFailure(what), trace_(std::move(trace))
    {
    }
    const PicardStepTrace& trace() const { return trace_; }

private:
    PicardStepTrace trace_;
};

/// Fine-grid discretization of the reduced dual-continuum system.
///
/// Unknowns are all fine nodes of both continua, stacked [p1; p2]. Boundary
/// nodes carry zero Dirichlet data.
class FlowProblem {
public:
    FlowProblem(StructuredGrid grid, CoefficientModel model, int quadrature_order = 2);

    const StructuredGrid& grid() const { return grid_; }
    const CoefficientModel& model() const { return model_; }
    int quadrature_order() const { return order_; }
    int num_nodes() const { return grid_.num_nodes(); }
    /// Unweighted mass matrix of one continuum.
    const SparseMatrix& mass() const { return mass_; }
    /// Boundary mask over the stacked unknowns.
    const std::vector<char>& dirichlet_mask() const { return mask_; }

    FrozenCoefficients freeze(const DualPressure& p) const;

    /// Block operator (M/tau + A + B + C) over the stacked unknowns of `grid`,
    /// without boundary conditions. Works on any grid the fields match.
    static SparseMatrix block_operator(const StructuredGrid& grid, const FrozenCoefficients& fc, double tau);
    /// Right-hand side M p_old / tau + F, stacked, without boundary conditions.
    Vector rhs(const FrozenCoefficients& fc, const DualPressure& old, double tau) const;

    /// sqrt(v' M v).
    double l2_norm(const Vector& v) const;

private:
    StructuredGrid grid_;
    CoefficientModel model_;
    int order_ = 2;
    SparseMatrix mass_;
    std::vector<char> mask_;
};

/// Restricts every field of `fc` to a rectangular block of elements.
FrozenCoefficients restrict_coefficients(const FrozenCoefficients& fc, int parent_nx, int ei0, int ej0, int nx,
                                         int ny);

/// Space in which each linearized system is solved.
class SolutionSpace {
public:
    virtual ~SolutionSpace() = default;
    /// Solves the linearized system frozen at `fc` and returns stacked fine values.
    virtual Vector solve(const FlowProblem& problem, const FrozenCoefficients& fc, const Vector& rhs,
                         double tau) const = 0;
    /// Applies the test-space restriction to a fine residual vector.
    virtual Vector project(const FlowProblem& problem, const Vector& fine) const = 0;
    virtual std::string name() const = 0;
};

/// The full fine space: Dirichlet elimination and a sparse direct solve.
class FineSpace final : public SolutionSpace {
public:
    Vector solve(const FlowProblem& problem, const FrozenCoefficients& fc, const Vector& rhs,
                 double tau) const override;
    Vector project(const FlowProblem& problem, const Vector& fine) const override;
    std::string name() const override { return "fine"; }
};

/// Relative successive-difference rule for both continua. With a mass matrix
/// the norm is the discrete L2 norm, otherwise the Euclidean norm. A zero old
/// norm passes only when the new iterate is zero too.
bool stopping_check(const DualPressure& p_new, const DualPressure& p_old, double tol,
                    const SparseMatrix* mass = nullptr);
std::array<double, 2> relative_differences(const DualPressure& p_new, const DualPressure& p_old,
                                           const SparseMatrix* mass = nullptr);

/// Relative residual |P (A(p) p - b)| / |P b| of the nonlinear discrete system
/// at p, where P is the space's test restriction.
double nonlinear_residual(const FlowProblem& problem, const SolutionSpace& space, const DualPressure& p,
                          const DualPressure& old, double tau);

struct StepResult {
    DualPressure state;
    PicardStepTrace trace;
};

/// Advances one backward Euler step of size cfg.step from `state`.
StepResult picard_step(const FlowProblem& problem, const SolutionSpace& space, const DualPressure& state,
                       const TimeSteppingConfig& cfg, int step_index = 1);

struct SimulationResult {
    DualPressure final_state;
    std::vector<PicardStepTrace> steps;
};

using StepObserver = std::function<void(const DualPressure&, const PicardStepTrace&)>;

SimulationResult run_simulation(const FlowProblem& problem, const SolutionSpace& space, const TimeSteppingConfig& cfg,
                                std::optional<DualPressure> initial = std::nullopt,
                                const StepObserver& observer = {});

/// Contraction factor of the Picard map from the first step, one per step size.
/// Geometric mean of the last (up to three) ratios of successive increments;
/// 0 when an increment vanishes.
std::vector<double> contraction_estimate(const FlowProblem& problem, const SolutionSpace& space,
                                         const TimeSteppingConfig& cfg, const std::vector<double>& steps);
double contraction_from_increments(const std::vector<double>& increments);

/// JSON report of a run's traces.
std::string trace_report_json(const std::vector<PicardStepTrace>& steps, const std::string& space_name);

}  // namespace dcflow
