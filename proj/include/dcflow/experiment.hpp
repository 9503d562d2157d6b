#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcflow/field_io.hpp"
#include "dcflow/gmsfem.hpp"
#include "dcflow/hier.hpp"
#include "dcflow/pou.hpp"
#include "dcflow/time_picard.hpp"

namespace dcflow {

enum class SolverMode { Fine, Uncoupled, Coupled };

std::string to_string(SolverMode mode);
/// Accepts fine, uncoupled, coupled and the gmsfem- prefixed forms.
SolverMode parse_solver_mode(const std::string& s);

/// Settings of one experiment. Read from INI-style text:
///
///   [grid]    fine = 128, coarse = 16
///   [model]   layout = <file>, a1 = <raster>, a2 = <raster>, transfer, convection
///   [time]    final = 2, step = 0.1, tolerance = 1e-5, max_iterations = 50
///   [solver]  modes = coupled, uncoupled   dims = 900, 1800   pou = multiscale
///   [output]  dir = <dir>, fields = raster | vtk | none
///   [run]     seed = 0
///
/// Unknown sections or keys are rejected. Relative paths resolve against the
/// directory of the config file.
struct ExperimentConfig {
    int fine_n = 128;
    int coarse_n = 16;
    std::string layout_file;  ///< empty: the shipped layout
    std::array<std::string, 2> raster_files;  ///< both set or both empty
    double transfer = 1e5;
    double convection = 30.0;
    TimeSteppingConfig time;
    std::vector<SolverMode> modes{SolverMode::Coupled, SolverMode::Uncoupled};
    std::vector<int> dims{900, 1800, 2700, 3600, 4500};
    PouMode pou = PouMode::Multiscale;
    std::string output_dir = "dcflow-out";
    bool write_fields = true;
    FieldFormat field_format = FieldFormat::RasterText;
    std::uint64_t seed = 0;  ///< reserved

    /// Throws InvalidArgument naming the offending setting.
    void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Coefficient model described by the config.
CoefficientModel build_model(const ExperimentConfig& config);

/// 100 ||p_ms,i - p_ref,i|| / ||p_ref,i|| in the mass-matrix norm, per continuum.
std::array<double, 2> relative_l2_error(const SparseMatrix& mass, const DualPressure& approx,
                                        const DualPressure& reference);

struct ErrorRow {
    SolverMode mode = SolverMode::Fine;
    int dim = 0;  ///< coarse unknowns; fine rows count interior nodes of both continua
    std::array<double, 2> error_percent{};
    std::vector<int> iterations;  ///< Picard iterations per time step
    double wall_seconds = 0.0;
};

struct ErrorReport {
    std::vector<ErrorRow> rows;
    std::vector<int> reference_iterations;
    double reference_seconds = 0.0;

    /// Error of `mode` at `dim`; throws InvalidArgument when absent.
    const ErrorRow& row(SolverMode mode, int dim) const;
};

/// CSV with columns mode,dim,err_p1_percent,err_p2_percent,iterations.
/// Wall times are left out so that equal configs give byte-identical files.
void write_report_csv(std::ostream& out, const ErrorReport& report);

/// Runs the fine reference, then every (mode, dim) pair, and writes
/// report.csv, manifest.json and the final-state fields into output_dir.
/// Failures are rethrown with the stage prefixed to the message.
ErrorReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

struct TrendCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Tolerance bands on the two error tables.
struct TableBands {
    double coupled_max = 0.7;
    double uncoupled_max = 1.2;
    int band_dim = 4500;
    int comparison_from = 1800;
};

/// Coupled errors strictly decreasing, coupled at most uncoupled from
/// `comparison_from` on, and both within their band at `band_dim`.
std::vector<TrendCheck> check_table_trends(const ErrorReport& report, const TableBands& bands = {});

/// One level of the hierarchical cell-problem benchmark.
struct HierBenchRow {
    int level = 0;
    int points = 0;
    int space = 0;
    std::int64_t space_dofs = 0;
    double max_error = 0.0;
};

struct HierBenchResult {
    int depth = 0;
    CellProblem problem;
    std::vector<HierBenchRow> rows;
    double fitted_constant = 0.0;
    std::int64_t hierarchical_dofs = 0;
    std::int64_t full_dofs = 0;
    double hierarchical_seconds = 0.0;
    double full_seconds = 0.0;
};

HierBenchResult run_hier_bench(const CellModel& model, int depth, const CellProblem& problem,
                               MeanPolicy policy = MeanPolicy::Reject);
void write_hier_bench(std::ostream& out, const std::vector<HierBenchResult>& results);

}  // namespace dcflow
