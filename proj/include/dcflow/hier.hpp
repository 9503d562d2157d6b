#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dcflow/homogenize.hpp"

namespace dcflow {

/// Dyadic macrogrid U on [a, b] with 2^L + 1 points split into levels.
///
/// Points are addressed by their index k in 0..2^L. Level 1 holds {a, mid, b};
/// level l >= 2 holds the odd multiples of (b - a) / 2^l. A pair (k1, k2) of
/// the 2D grid U x U sits at the larger of its coordinate levels.
class MacrogridHierarchy {
public:
    MacrogridHierarchy(double a, double b, int depth);

    double a() const { return a_; }
    double b() const { return b_; }
    int depth() const { return depth_; }
    int size() const { return (1 << depth_) + 1; }
    double coordinate(int k) const;

    int level(int k) const;
    int level(int k1, int k2) const;
    /// Nearest point of a lower level; ties go to the smaller coordinate.
    int ancestor(int k) const;
    std::array<int, 2> ancestor(int k1, int k2) const;

    std::vector<int> points(int level) const;
    std::vector<std::array<int, 2>> points2(int level) const;

private:
    void check_index(int k) const;

    double a_;
    double b_;
    int depth_;
};

MacrogridHierarchy build_hierarchy(double a, double b, int depth);

/// Nested periodic cell meshes V_1 ⊂ ... ⊂ V_L with 2^m x 2^m elements at level m.
class SpaceLadder {
public:
    explicit SpaceLadder(int depth);

    int depth() const { return static_cast<int>(meshes_.size()); }
    const UnitCellMesh& mesh(int m) const;
    const UnitCellMesh& finest() const { return meshes_.back(); }
    /// Interpolation from V_m into V_L.
    const SparseMatrix& prolongation(int m) const;

private:
    std::vector<UnitCellMesh> meshes_;
    std::vector<SparseMatrix> prolong_;
};

/// Periodic bilinear interpolation from an n x n cell mesh to an (r n) x (r n) one.
SparseMatrix periodic_prolongation(int n, int ratio);

/// dim V_m after periodic identification.
std::int64_t space_dofs(int m);

/// One of the four cell problem families.
struct CellProblem {
    enum class Kind { N, M } kind = Kind::N;
    int direction = 0;  ///< N only
    int continuum = 0;

    /// 1 for N (parametrized by p_continuum), 2 for M (by the pair).
    int parameter_dim() const { return kind == Kind::N ? 1 : 2; }
    std::string name() const;
};

struct HierEntry {
    std::array<int, 2> index{-1, -1};  ///< second entry is -1 for 1D parameters
    std::array<double, 2> p{0.0, 0.0};
    int level = 0;
    int space = 0;      ///< m of the space V_m the entry was solved in
    int ancestor = -1;  ///< entry position, -1 for anchors
    Vector solution;    ///< composite on the finest cell mesh, mean zero
    double residual = 0.0;  ///< relative weak-form residual in V_space
};

struct HierSolutionTable {
    CellProblem problem;
    int depth = 0;
    std::vector<HierEntry> entries;  ///< row-major over the parameter grid

    int position(int k1, int k2 = -1) const;
    const HierEntry& at(int k1, int k2 = -1) const { return entries[static_cast<std::size_t>(position(k1, k2))]; }
};

/// Anchors in V_L; a level-l point as its ancestor plus a correction in V_{L+1-l}.
HierSolutionTable hierarchical_cell_solve(const CellModel& model, const MacrogridHierarchy& hierarchy,
                                          const SpaceLadder& ladder, const CellProblem& problem,
                                          MeanPolicy policy = MeanPolicy::Reject);

/// Every point solved in V_L.
HierSolutionTable full_cell_solve(const CellModel& model, const MacrogridHierarchy& hierarchy,
                                  const SpaceLadder& ladder, const CellProblem& problem,
                                  MeanPolicy policy = MeanPolicy::Reject);

enum class DofMode { Hierarchical, Full };

/// Hierarchical: sum_l |S^l| dim V_{L+1-l}. Full: |U| dim V_L.
std::int64_t dof_count(const MacrogridHierarchy& hierarchy, DofMode mode, int parameter_dim);

struct LevelReport {
    int level = 0;
    int points = 0;
    int space = 0;
    std::int64_t space_dofs = 0;
    double max_error = 0.0;  ///< max || grad (reference - entry) ||_{L2(Y)}
};

struct ConvergenceReport {
    int depth = 0;
    std::vector<LevelReport> levels;
    /// max_l err(l) / (l 2^-L).
    double fitted_constant = 0.0;
};

ConvergenceReport convergence_report(const HierSolutionTable& table, const HierSolutionTable& reference,
                                     const SpaceLadder& ladder);

}  // namespace dcflow
