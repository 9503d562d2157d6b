// Command-line front end: simulate, homogenize, hier-bench, table, gen-field.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcflow/errors.hpp"
#include "dcflow/experiment.hpp"
#include "dcflow/field_io.hpp"
#include "dcflow/homogenize.hpp"
#include "dcflow/parallel.hpp"

using namespace dcflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct CommonOptions {
    std::string config;
    std::string mode;
    std::vector<int> dims;
    std::string out;
    unsigned threads = 1;
};

ExperimentConfig experiment_config(const CommonOptions& o)
{
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.mode.empty()) c.modes = {parse_solver_mode(o.mode)};
    if (!o.dims.empty()) c.dims = o.dims;
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

void print_report(const ErrorReport& report)
{
    std::cout << "fine reference: " << report.reference_seconds << " s\n";
    std::printf("%-10s %6s %12s %12s %10s %9s\n", "mode", "dim", "err_p1 %", "err_p2 %", "picard", "seconds");
    for (const ErrorRow& r : report.rows) {
        int total = 0;
        for (int it : r.iterations) total += it;
        std::printf("%-10s %6d %12.4f %12.4f %10d %9.1f\n", to_string(r.mode).c_str(), r.dim, r.error_percent[0],
                    r.error_percent[1], total, r.wall_seconds);
    }
}

CellModel cell_model(const std::string& name)
{
    if (name == "separable") return separable_cell_model();
    if (name == "lipschitz") return lipschitz_cell_model();
    throw InvalidArgument("unknown cell model '" + name + "' (expected separable or lipschitz)");
}

CellProblem cell_problem(const std::string& name)
{
    // N<direction><continuum> or M<continuum>, 1-based
    CellProblem p;
    if (name.size() == 3 && name[0] == 'N' && (name[1] == '1' || name[1] == '2') && (name[2] == '1' || name[2] == '2')) {
        p.kind = CellProblem::Kind::N;
        p.direction = name[1] - '1';
        p.continuum = name[2] - '1';
        return p;
    }
    if (name.size() == 2 && name[0] == 'M' && (name[1] == '1' || name[1] == '2')) {
        p.kind = CellProblem::Kind::M;
        p.continuum = name[1] - '1';
        return p;
    }
    throw InvalidArgument("unknown cell problem '" + name + "' (expected N11, N12, N21, N22, M1 or M2)");
}

std::vector<double> uniform_points(double a, double b, int count)
{
    if (count < 1) throw InvalidArgument("need at least one macro point");
    std::vector<double> p(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) p[static_cast<std::size_t>(k)] = count == 1 ? a : a + (b - a) * k / (count - 1);
    return p;
}

void with_output(const std::string& path, const std::function<void(std::ostream&)>& body)
{
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    body(out);
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual-continuum unsaturated flow: fine and multiscale solvers, homogenization"};
    app.require_subcommand(1);
    unsigned threads = 1;
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    CommonOptions sim_opts;
    auto* sim = app.add_subcommand("simulate", "fine or multiscale run with error report");
    sim->add_option("--config", sim_opts.config, "experiment config (INI)")->check(CLI::ExistingFile);
    sim->add_option("--mode", sim_opts.mode, "fine, uncoupled or coupled");
    sim->add_option("--dims", sim_opts.dims, "multiscale dimensions")->delimiter(',');
    sim->add_option("--out", sim_opts.out, "output directory");

    std::string hom_model = "lipschitz", hom_out, hom_policy = "reject";
    int hom_n = 64, hom_points = 5;
    auto* hom = app.add_subcommand("homogenize", "cell problems and effective coefficient table");
    hom->add_option("--model", hom_model, "separable or lipschitz");
    hom->add_option("--cell", hom_n, "cell mesh elements per side")->check(CLI::Range(2, 4096));
    hom->add_option("--points", hom_points, "macro points per pressure axis")->check(CLI::Range(1, 1025));
    hom->add_option("--mean", hom_policy, "reject or subtract a nonzero transfer mean");
    hom->add_option("--out", hom_out, "JSON output file (default stdout)");

    std::vector<int> hb_depths{3, 4, 5};
    std::string hb_problem = "N11", hb_model = "lipschitz", hb_out;
    auto* hb = app.add_subcommand("hier-bench", "hierarchical versus full cell-problem solves");
    hb->add_option("--depths", hb_depths, "hierarchy depths L")->delimiter(',');
    hb->add_option("--problem", hb_problem, "N11, N12, N21, N22, M1 or M2");
    hb->add_option("--model", hb_model, "separable or lipschitz");
    hb->add_option("--out", hb_out, "output file (default stdout)");

    CommonOptions tab_opts;
    auto* tab = app.add_subcommand("table", "reproduce the coupled and uncoupled error tables and check their trends");
    tab->add_option("--config", tab_opts.config, "experiment config (INI)")->check(CLI::ExistingFile);
    tab->add_option("--dims", tab_opts.dims, "multiscale dimensions")->delimiter(',');
    tab->add_option("--out", tab_opts.out, "output directory");

    std::string gf_layout, gf_out;
    int gf_n = 128, gf_continuum = 1;
    auto* gf = app.add_subcommand("gen-field", "rasterize a channel layout");
    gf->add_option("--layout", gf_layout, "layout file (default: shipped layout)")->check(CLI::ExistingFile);
    gf->add_option("--n", gf_n, "elements per side")->check(CLI::Range(1, 1 << 16));
    gf->add_option("--continuum", gf_continuum, "1 or 2")->check(CLI::Range(1, 2));
    gf->add_option("--out", gf_out, "raster file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }
    set_worker_threads(threads);

    try {
        if (*sim) {
            const ErrorReport report = run_experiment(experiment_config(sim_opts), &std::cerr);
            print_report(report);
        } else if (*hom) {
            const CellModel model = cell_model(hom_model);
            MeanPolicy policy = MeanPolicy::Reject;
            if (hom_policy == "subtract") policy = MeanPolicy::Subtract;
            else if (hom_policy != "reject") throw InvalidArgument("--mean expects reject or subtract");
            const UnitCellMesh mesh(hom_n);
            const std::vector<double> p = uniform_points(model.a, model.b, hom_points);
            const auto table = effective_table(mesh, model, p, p, policy);
            with_output(hom_out, [&](std::ostream& out) { write_effective_table(out, table); });
        } else if (*hb) {
            const CellModel model = cell_model(hb_model);
            const CellProblem problem = cell_problem(hb_problem);
            std::vector<HierBenchResult> results;
            for (int depth : hb_depths) results.push_back(run_hier_bench(model, depth, problem));
            with_output(hb_out, [&](std::ostream& out) { write_hier_bench(out, results); });
        } else if (*tab) {
            ExperimentConfig c = experiment_config(tab_opts);
            c.modes = {SolverMode::Coupled, SolverMode::Uncoupled};
            const ErrorReport report = run_experiment(c, &std::cerr);
            print_report(report);
            bool ok = true;
            for (const TrendCheck& t : check_table_trends(report)) {
                std::cout << (t.passed ? "ok    " : "FAILED") << "  " << t.name;
                if (!t.detail.empty()) std::cout << "  (" << t.detail << ")";
                std::cout << '\n';
                ok = ok && t.passed;
            }
            return ok ? kExitOk : kExitFailure;
        } else if (*gf) {
            const ChannelLayout layout = gf_layout.empty() ? default_channel_layout() : load_channel_layout(gf_layout);
            const ElementField f = channelized_field(layout.spec(gf_continuum - 1, gf_n, gf_n));
            with_output(gf_out, [&](std::ostream& out) { write_raster(out, f.nx, f.ny, f.values); });
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
