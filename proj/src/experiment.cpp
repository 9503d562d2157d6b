#include "dcflow/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "dcflow/errors.hpp"

namespace dcflow {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(stage + ": " + e.what());
    } catch (const SolverFailure& e) {
        throw SolverFailure(stage + ": " + e.what());
    } catch (const InvariantViolation& e) {
        throw InvariantViolation(stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(stage + ": " + e.what());
    }
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(", \t"), boost::token_compress_on);
    std::erase_if(parts, [](const std::string& p) { return p.empty(); });
    return parts;
}

long parse_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long out = 0;
    try {
        out = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw InvalidArgument("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw InvalidArgument("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

PouMode parse_pou(const std::string& v)
{
    if (v == "multiscale") return PouMode::Multiscale;
    if (v == "bilinear") return PouMode::Bilinear;
    throw InvalidArgument("config: 'solver.pou' expects multiscale or bilinear, got '" + v + "'");
}

std::string resolve(const std::string& base, const std::string& p)
{
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base) / p).lexically_normal().string();
}

std::string format_percent(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string field_name(const std::string& stem, int continuum, FieldFormat format)
{
    return stem + "_p" + std::to_string(continuum + 1) + (format == FieldFormat::RasterText ? ".txt" : ".vtk");
}

}  // namespace

std::string to_string(SolverMode mode)
{
    switch (mode) {
    case SolverMode::Fine: return "fine";
    case SolverMode::Uncoupled: return "uncoupled";
    case SolverMode::Coupled: return "coupled";
    }
    return "?";
}

SolverMode parse_solver_mode(const std::string& s)
{
    if (s == "fine") return SolverMode::Fine;
    if (s == "uncoupled" || s == "gmsfem-uncoupled") return SolverMode::Uncoupled;
    if (s == "coupled" || s == "gmsfem-coupled") return SolverMode::Coupled;
    throw InvalidArgument("unknown solver mode '" + s + "' (expected fine, uncoupled or coupled)");
}

void ExperimentConfig::validate() const
{
    if (fine_n < 2 || coarse_n < 2) throw InvalidArgument("config: grid sizes must be at least 2");
    try {
        time.steps();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    if (fine_n % coarse_n != 0)
        throw InvalidArgument("config: fine size " + std::to_string(fine_n) + " is not a multiple of coarse size " +
                              std::to_string(coarse_n));
    if (raster_files[0].empty() != raster_files[1].empty())
        throw InvalidArgument("config: give both model.a1 and model.a2 rasters or neither");
    if (!raster_files[0].empty() && !layout_file.empty())
        throw InvalidArgument("config: model.layout and model rasters are mutually exclusive");
    for (const std::string& f : {layout_file, raster_files[0], raster_files[1]})
        if (!f.empty() && !fs::is_regular_file(f)) throw InvalidArgument("config: file '" + f + "' does not exist");
    if (!(transfer >= 0.0) || !std::isfinite(convection)) throw InvalidArgument("config: bad model coefficients");
    time.validate();
    if (modes.empty()) throw InvalidArgument("config: solver.modes is empty");
    const bool multiscale = std::any_of(modes.begin(), modes.end(), [](SolverMode m) { return m != SolverMode::Fine; });
    if (multiscale && dims.empty()) throw InvalidArgument("config: solver.dims is empty");
    const int nodes = (coarse_n - 1) * (coarse_n - 1);
    for (int d : dims)
        for (SolverMode m : modes)
            if (m != SolverMode::Fine)
                basis_per_node(m == SolverMode::Coupled ? BasisMode::Coupled : BasisMode::Uncoupled, d, nodes);
    if (output_dir.empty()) throw InvalidArgument("config: output.dir is empty");
}

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }

    static const std::map<std::string, std::set<std::string>> schema{
        {"grid", {"fine", "coarse"}},
        {"model", {"layout", "a1", "a2", "transfer", "convection"}},
        {"time", {"final", "step", "tolerance", "max_iterations"}},
        {"solver", {"modes", "dims", "pou"}},
        {"output", {"dir", "fields"}},
        {"run", {"seed"}},
    };
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
        auto it = schema.find(section);
        if (it == schema.end()) {
            if (body.empty()) throw InvalidArgument("config: key '" + section + "' outside any section");
            throw InvalidArgument("config: unknown section [" + section + "]");
        }
        for (const auto& [key, node] : body) {
            if (!it->second.contains(key)) throw InvalidArgument("config: unknown key '" + section + "." + key + "'");
            const std::string name = section + "." + key;
            const std::string v = boost::trim_copy(node.data());
            if (name == "grid.fine") c.fine_n = static_cast<int>(parse_int(name, v));
            else if (name == "grid.coarse") c.coarse_n = static_cast<int>(parse_int(name, v));
            else if (name == "model.layout") c.layout_file = resolve(base_dir, v);
            else if (name == "model.a1") c.raster_files[0] = resolve(base_dir, v);
            else if (name == "model.a2") c.raster_files[1] = resolve(base_dir, v);
            else if (name == "model.transfer") c.transfer = parse_real(name, v);
            else if (name == "model.convection") c.convection = parse_real(name, v);
            else if (name == "time.final") c.time.final_time = parse_real(name, v);
            else if (name == "time.step") c.time.step = parse_real(name, v);
            else if (name == "time.tolerance") c.time.tolerance = parse_real(name, v);
            else if (name == "time.max_iterations") c.time.max_iterations = static_cast<int>(parse_int(name, v));
            else if (name == "solver.modes") {
                c.modes.clear();
                for (const std::string& m : split_list(v)) c.modes.push_back(parse_solver_mode(m));
            } else if (name == "solver.dims") {
                c.dims.clear();
                for (const std::string& d : split_list(v)) c.dims.push_back(static_cast<int>(parse_int(name, d)));
            } else if (name == "solver.pou") c.pou = parse_pou(v);
            else if (name == "output.dir") c.output_dir = resolve(base_dir, v);
            else if (name == "output.fields") {
                c.write_fields = v != "none";
                if (c.write_fields) c.field_format = parse_field_format(v);
            } else if (name == "run.seed") c.seed = static_cast<std::uint64_t>(parse_int(name, v));
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config '" + path + "'");
    const fs::path parent = fs::path(path).parent_path();
    return parse_config(in, parent.empty() ? "." : parent.string());
}

CoefficientModel build_model(const ExperimentConfig& config)
{
    CoefficientModel m;
    if (!config.raster_files[0].empty()) {
        ElementField a1 = load_raster(config.raster_files[0]);
        ElementField a2 = load_raster(config.raster_files[1]);
        if (a1.nx != config.fine_n || a1.ny != config.fine_n)
            throw InvalidArgument("raster '" + config.raster_files[0] + "' is " + std::to_string(a1.nx) + "x" +
                                  std::to_string(a1.ny) + ", grid is " + std::to_string(config.fine_n) + "x" +
                                  std::to_string(config.fine_n));
        m = test_problem(std::move(a1), std::move(a2));
    } else {
        const ChannelLayout layout =
            config.layout_file.empty() ? default_channel_layout() : load_channel_layout(config.layout_file);
        m = test_problem(config.fine_n, config.fine_n, layout);
    }
    m.transfer = config.transfer;
    m.convection_scale = config.convection;
    return m;
}

std::array<double, 2> relative_l2_error(const SparseMatrix& mass, const DualPressure& approx,
                                        const DualPressure& reference)
{
    const std::array<const Vector*, 2> a{&approx.p1, &approx.p2};
    const std::array<const Vector*, 2> r{&reference.p1, &reference.p2};
    std::array<double, 2> out{};
    for (int i = 0; i < 2; ++i) {
        if (a[i]->size() != mass.rows() || r[i]->size() != mass.rows())
            throw InvalidArgument("relative_l2_error: fields do not match the mass matrix");
        const double ref = std::sqrt(std::max(0.0, r[i]->dot(mass * *r[i])));
        if (!(ref > 0.0)) throw InvalidArgument("relative_l2_error: reference field of continuum " +
                                                std::to_string(i + 1) + " has zero norm");
        const Vector d = *a[i] - *r[i];
        out[i] = 100.0 * std::sqrt(std::max(0.0, d.dot(mass * d))) / ref;
    }
    return out;
}

const ErrorRow& ErrorReport::row(SolverMode mode, int dim) const
{
    for (const ErrorRow& r : rows)
        if (r.mode == mode && r.dim == dim) return r;
    throw InvalidArgument("report has no " + to_string(mode) + " row at dim " + std::to_string(dim));
}

void write_report_csv(std::ostream& out, const ErrorReport& report)
{
    out << "mode,dim,err_p1_percent,err_p2_percent,iterations\n";
    for (const ErrorRow& r : report.rows) {
        out << to_string(r.mode) << ',' << r.dim << ',' << format_percent(r.error_percent[0]) << ','
            << format_percent(r.error_percent[1]) << ',';
        for (std::size_t k = 0; k < r.iterations.size(); ++k) out << (k ? ";" : "") << r.iterations[k];
        out << '\n';
    }
}

ErrorReport run_experiment(const ExperimentConfig& config, std::ostream* log)
{
    using nlohmann::json;
    config.validate();
    auto note = [&](const std::string& s) {
        if (log) *log << s << std::endl;
    };

    const fs::path dir(config.output_dir);
    staged("output", [&] { fs::create_directories(dir); });

    const StructuredGrid grid = build_fine_grid(config.fine_n, config.fine_n);
    const FlowProblem problem = staged("model", [&] { return FlowProblem(grid, build_model(config)); });
    const NestedGrids grids = staged("grid", [&] { return build_coarse_grid(grid, config.coarse_n); });
    const int interior_coarse = grids.coarse.num_interior_nodes();

    json manifest;
    manifest["grid"] = {{"fine", config.fine_n}, {"coarse", config.coarse_n}};
    manifest["time"] = {{"final", config.time.final_time},
                        {"step", config.time.step},
                        {"tolerance", config.time.tolerance},
                        {"max_iterations", config.time.max_iterations}};
    manifest["model"] = {{"layout", config.layout_file.empty() ? "default" : config.layout_file},
                         {"a1", config.raster_files[0]},
                         {"a2", config.raster_files[1]},
                         {"transfer", config.transfer},
                         {"convection", config.convection},
                         {"channel_fraction",
                          {channel_area_fraction(problem.model().permeability[0],
                                                 problem.model().permeability[0].min()),
                           channel_area_fraction(problem.model().permeability[1],
                                                 problem.model().permeability[1].min())}}};
    manifest["seed"] = config.seed;
    manifest["files"] = json::array();

    auto write_state = [&](const std::string& stem, const DualPressure& s) {
        if (!config.write_fields) return;
        const std::array<const Vector*, 2> v{&s.p1, &s.p2};
        for (int i = 0; i < 2; ++i) {
            const std::string name = field_name(stem, i, config.field_format);
            export_nodal(grid, *v[i], (dir / name).string(), config.field_format, stem + "_p" + std::to_string(i + 1));
            manifest["files"].push_back(name);
        }
    };
    auto iterations_of = [](const SimulationResult& r) {
        std::vector<int> it;
        for (const PicardStepTrace& s : r.steps) it.push_back(s.iterations);
        return it;
    };

    ErrorReport report;
    note("fine reference on " + std::to_string(config.fine_n) + "^2");
    auto t0 = std::chrono::steady_clock::now();
    const SimulationResult reference =
        staged("fine reference", [&] { return run_simulation(problem, FineSpace{}, config.time); });
    report.reference_seconds = seconds_since(t0);
    report.reference_iterations = iterations_of(reference);
    staged("output", [&] { write_state("reference", reference.final_state); });

    json runs = json::array();
    for (SolverMode mode : config.modes) {
        if (mode == SolverMode::Fine) {
            ErrorRow row;
            row.mode = mode;
            row.dim = 2 * grid.num_interior_nodes();
            row.iterations = report.reference_iterations;
            row.wall_seconds = report.reference_seconds;
            report.rows.push_back(row);
            continue;
        }
        const BasisMode bm = mode == SolverMode::Coupled ? BasisMode::Coupled : BasisMode::Uncoupled;
        const std::string tag = to_string(mode);
        int max_per_node = 0;
        for (int d : config.dims) max_per_node = std::max(max_per_node, basis_per_node(bm, d, interior_coarse));

        OfflineOptions options;
        options.mode = bm;
        options.pou = config.pou;
        options.max_per_node = max_per_node;
        note(tag + ": offline basis, " + std::to_string(max_per_node) + " per node");
        t0 = std::chrono::steady_clock::now();
        const OfflineBasis offline = staged(tag + " offline", [&] {
            return build_offline_basis(problem, grids, DualPressure::zero(grid), options);
        });
        const double offline_seconds = seconds_since(t0);

        for (int d : config.dims) {
            const std::string stage = tag + " dim " + std::to_string(d);
            t0 = std::chrono::steady_clock::now();
            const MultiscaleSpace space =
                staged(stage, [&] { return build_multiscale_space(offline, basis_per_node(bm, d, interior_coarse)); });
            const SimulationResult run = staged(stage, [&] { return run_simulation(problem, space, config.time); });
            ErrorRow row;
            row.mode = mode;
            row.dim = d;
            row.error_percent = relative_l2_error(problem.mass(), run.final_state, reference.final_state);
            row.iterations = iterations_of(run);
            row.wall_seconds = seconds_since(t0);
            report.rows.push_back(row);
            note(stage + ": " + format_percent(row.error_percent[0]) + "% " + format_percent(row.error_percent[1]) +
                 "%");
            staged("output", [&] { write_state(tag + "_" + std::to_string(d), run.final_state); });
            runs.push_back({{"mode", tag},
                            {"dim", d},
                            {"columns", space.dim()},
                            {"warnings", space.warnings()},
                            {"offline_seconds", offline_seconds},
                            {"online_seconds", row.wall_seconds}});
        }
    }
    manifest["reference"] = {{"iterations", report.reference_iterations}, {"seconds", report.reference_seconds}};
    manifest["runs"] = runs;
    manifest["files"].push_back("report.csv");

    staged("output", [&] {
        std::ofstream csv(dir / "report.csv", std::ios::binary);
        write_report_csv(csv, report);
        std::ofstream man(dir / "manifest.json", std::ios::binary);
        man << manifest.dump(2) << '\n';
        if (!csv || !man) throw std::runtime_error("cannot write report files in '" + dir.string() + "'");
    });
    return report;
}

std::vector<TrendCheck> check_table_trends(const ErrorReport& report, const TableBands& bands)
{
    std::vector<TrendCheck> out;
    std::vector<const ErrorRow*> coupled;
    for (const ErrorRow& r : report.rows)
        if (r.mode == SolverMode::Coupled) coupled.push_back(&r);
    std::sort(coupled.begin(), coupled.end(), [](const ErrorRow* a, const ErrorRow* b) { return a->dim < b->dim; });

    TrendCheck dec{"coupled errors strictly decrease", coupled.size() >= 2, ""};
    for (std::size_t k = 1; k < coupled.size(); ++k)
        for (int i = 0; i < 2; ++i)
            if (!(coupled[k]->error_percent[i] < coupled[k - 1]->error_percent[i])) {
                dec.passed = false;
                dec.detail += "p" + std::to_string(i + 1) + " at dim " + std::to_string(coupled[k]->dim) + "; ";
            }
    if (coupled.size() < 2) dec.detail = "fewer than two coupled rows";
    out.push_back(dec);

    TrendCheck cmp{"coupled <= uncoupled for dim >= " + std::to_string(bands.comparison_from), true, ""};
    int compared = 0;
    for (const ErrorRow* c : coupled) {
        if (c->dim < bands.comparison_from) continue;
        for (const ErrorRow& u : report.rows) {
            if (u.mode != SolverMode::Uncoupled || u.dim != c->dim) continue;
            ++compared;
            for (int i = 0; i < 2; ++i)
                if (c->error_percent[i] > u.error_percent[i]) {
                    cmp.passed = false;
                    cmp.detail += "p" + std::to_string(i + 1) + " at dim " + std::to_string(c->dim) + "; ";
                }
        }
    }
    if (compared == 0) {
        cmp.passed = false;
        cmp.detail = "no matching rows";
    }
    out.push_back(cmp);

    for (SolverMode mode : {SolverMode::Coupled, SolverMode::Uncoupled}) {
        const double limit = mode == SolverMode::Coupled ? bands.coupled_max : bands.uncoupled_max;
        TrendCheck band{to_string(mode) + " within " + format_percent(limit) + "% at dim " +
                            std::to_string(bands.band_dim),
                        false, "row missing"};
        for (const ErrorRow& r : report.rows)
            if (r.mode == mode && r.dim == bands.band_dim) {
                band.passed = r.error_percent[0] <= limit && r.error_percent[1] <= limit;
                band.detail = format_percent(r.error_percent[0]) + "% / " + format_percent(r.error_percent[1]) + "%";
            }
        out.push_back(band);
    }
    return out;
}

HierBenchResult run_hier_bench(const CellModel& model, int depth, const CellProblem& problem, MeanPolicy policy)
{
    const MacrogridHierarchy hierarchy(model.a, model.b, depth);
    const SpaceLadder ladder(depth);
    HierBenchResult out;
    out.depth = depth;
    out.problem = problem;

    auto t0 = std::chrono::steady_clock::now();
    const HierSolutionTable hier = hierarchical_cell_solve(model, hierarchy, ladder, problem, policy);
    out.hierarchical_seconds = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const HierSolutionTable full = full_cell_solve(model, hierarchy, ladder, problem, policy);
    out.full_seconds = seconds_since(t0);

    const ConvergenceReport conv = convergence_report(hier, full, ladder);
    for (const LevelReport& l : conv.levels)
        out.rows.push_back({l.level, l.points, l.space, l.space_dofs, l.max_error});
    out.fitted_constant = conv.fitted_constant;
    out.hierarchical_dofs = dof_count(hierarchy, DofMode::Hierarchical, problem.parameter_dim());
    out.full_dofs = dof_count(hierarchy, DofMode::Full, problem.parameter_dim());
    return out;
}

void write_hier_bench(std::ostream& out, const std::vector<HierBenchResult>& results)
{
    char buf[256];
    for (const HierBenchResult& r : results) {
        std::snprintf(buf, sizeof buf, "%s  L=%d  dofs hierarchical=%lld full=%lld  time hierarchical=%.2fs full=%.2fs  C=%.4g\n",
                      r.problem.name().c_str(), r.depth, static_cast<long long>(r.hierarchical_dofs),
                      static_cast<long long>(r.full_dofs), r.hierarchical_seconds, r.full_seconds, r.fitted_constant);
        out << buf;
        out << "  level  points  space  space_dofs  max_error\n";
        for (const HierBenchRow& row : r.rows) {
            std::snprintf(buf, sizeof buf, "  %5d  %6d  %5d  %10lld  %.4e\n", row.level, row.points, row.space,
                          static_cast<long long>(row.space_dofs), row.max_error);
            out << buf;
        }
    }
}

}  // namespace dcflow
