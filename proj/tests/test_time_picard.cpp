#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "dcflow/errors.hpp"
#include "dcflow/time_picard.hpp"

using namespace dcflow;

namespace {

DualPressure make_state(Vector p1, Vector p2) { return {std::move(p1), std::move(p2), 0.0}; }

CoefficientModel linear_model(int n)
{
    CoefficientModel m = test_problem(n, n);
    m.pressure_dependent = false;
    m.transfer_pressure_dependent = false;
    m.convection_scale = 0.0;
    return m;
}

}  // namespace

TEST_CASE("time stepping config")
{
    TimeSteppingConfig c;
    CHECK(c.steps() == 20);
    c.step = 0.3;
    c.final_time = 1.0;
    CHECK_THROWS_AS(c.steps(), InvalidArgument);
    c.step = -0.1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("stopping rule")
{
    const Vector a = Vector::Constant(4, 2.0);
    CHECK(stopping_check(make_state(a, a), make_state(a, a), 1e-5));

    const Vector b = a * (1.0 + 2e-5);
    CHECK_FALSE(stopping_check(make_state(b, a), make_state(a, a), 1e-5));
    CHECK_FALSE(stopping_check(make_state(a, b), make_state(a, a), 1e-5));
    CHECK(stopping_check(make_state(a * (1.0 + 5e-6), a), make_state(a, a), 1e-5));

    const Vector z = Vector::Zero(4);
    CHECK(stopping_check(make_state(z, z), make_state(z, z), 1e-5));
    CHECK_FALSE(stopping_check(make_state(a, z), make_state(z, z), 1e-5));
}

TEST_CASE("linear problem converges at the second iterate")
{
    const StructuredGrid g = build_fine_grid(16, 16);
    const FlowProblem problem(g, linear_model(16));
    TimeSteppingConfig cfg;
    cfg.final_time = cfg.step;
    const StepResult r = picard_step(problem, FineSpace{}, DualPressure::zero(g), cfg);
    CHECK(r.trace.iterations == 2);
    REQUIRE(r.trace.differences.size() == 2);
    CHECK(r.trace.differences[1][0] == 0.0);
    CHECK(r.trace.differences[1][1] == 0.0);
    CHECK(r.trace.residual <= 1e-9);
    CHECK(contraction_estimate(problem, FineSpace{}, cfg, {0.1, 0.05}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("zero source keeps the zero state")
{
    const StructuredGrid g = build_fine_grid(8, 8);
    CoefficientModel m = test_problem(8, 8);
    m.source = {0.0, 0.0};
    const FlowProblem problem(g, m);
    TimeSteppingConfig cfg;
    cfg.final_time = 0.2;
    const SimulationResult r = run_simulation(problem, FineSpace{}, cfg);
    for (const PicardStepTrace& s : r.steps) CHECK(s.iterations == 1);
    CHECK(r.final_state.p1.norm() == 0.0);
    CHECK(r.final_state.p2.norm() == 0.0);
}

TEST_CASE("one-step simulation equals one Picard step")
{
    const StructuredGrid g = build_fine_grid(16, 16);
    const FlowProblem problem(g, test_problem(16, 16));
    TimeSteppingConfig cfg;
    cfg.final_time = cfg.step;
    const SimulationResult sim = run_simulation(problem, FineSpace{}, cfg);
    const StepResult step = picard_step(problem, FineSpace{}, DualPressure::zero(g), cfg);
    REQUIRE(sim.steps.size() == 1);
    CHECK((sim.final_state.p1 - step.state.p1).norm() == 0.0);
    CHECK((sim.final_state.p2 - step.state.p2).norm() == 0.0);
    CHECK(sim.final_state.t == doctest::Approx(0.1));
}

TEST_CASE("pure diffusion is dissipative")
{
    const int n = 24;
    const StructuredGrid g = build_fine_grid(n, n);
    CoefficientModel m = test_problem(n, n);
    m.convection_scale = 0.0;
    m.source = {0.0, 0.0};
    const FlowProblem problem(g, m);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    DualPressure init = DualPressure::zero(g);
    for (int k = 0; k < g.num_nodes(); ++k)
        if (!g.is_boundary_node(k)) {
            init.p1[k] = u(rng);
            init.p2[k] = u(rng);
        }
    auto energy = [&](const DualPressure& s) {
        return std::pow(problem.l2_norm(s.p1), 2) + std::pow(problem.l2_norm(s.p2), 2);
    };
    TimeSteppingConfig cfg;
    cfg.final_time = 0.5;
    std::vector<double> e{energy(init)};
    run_simulation(problem, FineSpace{}, cfg, init, [&](const DualPressure& s, const PicardStepTrace&) {
        e.push_back(energy(s));
    });
    for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k] < e[k - 1]);
}

TEST_CASE("iteration cap raises NonConvergence with its trace")
{
    const StructuredGrid g = build_fine_grid(16, 16);
    const FlowProblem problem(g, test_problem(16, 16));
    TimeSteppingConfig cfg;
    cfg.max_iterations = 1;
    try {
        picard_step(problem, FineSpace{}, DualPressure::zero(g), cfg);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.trace().differences.size() == 1);
    }
}

TEST_CASE("contraction estimate from increments")
{
    CHECK(contraction_from_increments({1.0, 0.5, 0.25, 0.125}) == doctest::Approx(0.5));
    CHECK(contraction_from_increments({1.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(contraction_from_increments({1.0, 0.5}), InsufficientData);
}

TEST_CASE("first benchmark step on the fine grid")
{
    // regression baseline measured once from the 128 x 128 fine solver
    const StructuredGrid g = build_fine_grid(128, 128);
    const FlowProblem problem(g, test_problem(128, 128));
    TimeSteppingConfig cfg;
    const StepResult r = picard_step(problem, FineSpace{}, DualPressure::zero(g), cfg);
    CHECK(r.trace.iterations == 3);
    CHECK(r.trace.residual <= 1e-6);

    const std::string json = trace_report_json({r.trace}, "fine");
    const auto parsed = nlohmann::json::parse(json);
    CHECK(parsed.dump().find("fine") != std::string::npos);
}
