#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcflow/fem.hpp"
#include "dcflow/grid.hpp"
#include "dcflow/pou.hpp"
#include "dcflow/time_picard.hpp"

namespace dcflow {

enum class BasisMode { Uncoupled, Coupled };

std::string to_string(BasisMode mode);
BasisMode parse_basis_mode(const std::string& s);

enum class SnapshotKind {
    Harmonic,   ///< local harmonic extensions of boundary spikes
    LocalFine,  ///< every fine nodal function of the neighborhood
};

/// Snapshot vectors of one neighborhood, as nodal values on its patch.
///
/// Uncoupled: rows are patch nodes, column k carries the spike at boundary
/// node k. Coupled: rows are [continuum 1; continuum 2] patch nodes, column
/// r * N_J + k carries the spike at boundary node k in continuum r.
struct SnapshotSpace {
    int neighborhood = -1;
    BasisMode mode = BasisMode::Uncoupled;
    int continuum = 0;  ///< uncoupled only
    NodePatch patch;
    std::vector<int> boundary_local;  ///< patch-local index of each boundary node, counterclockwise
    Matrix vectors;

    int size() const { return static_cast<int>(vectors.cols()); }
};

/// Harmonic snapshots of -div(kappa grad phi) = 0 in the neighborhood.
SnapshotSpace uncoupled_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, const QuadField& kappa,
                                  int continuum = 0);
/// Snapshots of the coupled local system with transfer c_s.
SnapshotSpace coupled_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, const QuadField& kappa1,
                                const QuadField& kappa2, const QuadField& cs);
/// Unit vectors of every patch node (per continuum in coupled mode).
SnapshotSpace local_fine_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, BasisMode mode,
                                   int continuum = 0);

/// kappa * sum_l |grad chi_l|^2 at the quadrature points of kappa.
QuadField spectral_weight(const PartitionOfUnity& pou, const QuadField& kappa);

/// Smallest m eigenpairs of a(psi, xi) = lambda s(psi, xi) on the snapshot space.
/// `kappa` and `weight` are full fine-grid fields; uncoupled spaces use the
/// entry of their continuum. Eigenvectors are returned as patch nodal values.
EigenPairs spectral_decompose(const NestedGrids& grids, const SnapshotSpace& space,
                              const std::array<QuadField, 2>& kappa, const std::array<QuadField, 2>& weight, int m);

struct OfflineOptions {
    BasisMode mode = BasisMode::Coupled;
    SnapshotKind snapshots = SnapshotKind::Harmonic;
    PouMode pou = PouMode::Multiscale;
    int max_per_node = 20;  ///< coupled: vector functions per node; uncoupled: per continuum per node
    int quadrature_order = 3;
};

/// Local eigenfunctions for every interior coarse node, computed once from a
/// frozen state and truncated later.
struct OfflineBasis {
    OfflineOptions options;
    NestedGrids grids;
    std::vector<int> nodes;                  ///< interior coarse nodes
    std::vector<NodePatch> patches;          ///< per node
    std::vector<std::array<Matrix, 2>> modes;  ///< uncoupled: [continuum]; coupled: [0] stacked pairs
    std::vector<std::array<Vector, 2>> eigenvalues;
    std::array<PartitionOfUnity, 2> pou;
};

OfflineBasis build_offline_basis(const FlowProblem& problem, const NestedGrids& grids, const DualPressure& frozen,
                                 const OfflineOptions& options);

/// Coarse space spanned by partition-of-unity weighted eigenfunctions.
class MultiscaleSpace final : public SolutionSpace {
public:
    struct Column {
        int coarse_node = -1;
        int continuum = -1;  ///< -1 for coupled pairs
        int index = 0;       ///< eigenfunction index within the node
    };

    MultiscaleSpace(NestedGrids grids, BasisMode mode, SparseMatrix r, std::vector<Column> columns,
                    std::vector<std::string> warnings = {});

    Vector solve(const FlowProblem& problem, const FrozenCoefficients& fc, const Vector& rhs,
                 double tau) const override;
    Vector project(const FlowProblem& problem, const Vector& fine) const override;
    std::string name() const override;

    /// R^T A R for the block operator frozen at fc.
    SparseMatrix coarse_operator(const FlowProblem& problem, const FrozenCoefficients& fc, double tau) const;

    BasisMode mode() const { return mode_; }
    const NestedGrids& grids() const { return grids_; }
    const SparseMatrix& prolongation() const { return r_; }
    const std::vector<Column>& columns() const { return columns_; }
    /// Coarse unknowns (the tables' dim(V_ms)).
    int dim() const { return static_cast<int>(r_.cols()); }
    /// Scalar fine-space components: coupled pairs count twice.
    int scalar_columns() const { return mode_ == BasisMode::Coupled ? 2 * dim() : dim(); }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct ElementBlock {
        std::vector<int> columns;
        Matrix values;  ///< stacked patch nodes x columns
    };

    NestedGrids grids_;
    BasisMode mode_;
    SparseMatrix r_;
    SparseMatrix rt_;
    std::vector<Column> columns_;
    std::vector<std::string> warnings_;
    std::vector<ElementBlock> blocks_;
};

/// Per-node eigenfunction count for a target dim on `num_nodes` interior coarse nodes.
int basis_per_node(BasisMode mode, int dim, int num_nodes);

/// Keeps the first `per_node` eigenfunctions per node (per continuum in
/// uncoupled mode) and multiplies them by the node's partition function.
/// Numerically dependent columns within a neighborhood are dropped with a warning.
MultiscaleSpace build_multiscale_space(const OfflineBasis& offline, int per_node);

/// One-shot construction from a frozen state.
MultiscaleSpace build_multiscale_space(const FlowProblem& problem, const NestedGrids& grids, const DualPressure& frozen,
                                       BasisMode mode, int per_node);

/// Solves (R^T A R) u = R^T rhs and returns R u.
Vector coarse_solve_system(const SparseMatrix& a, const Vector& rhs, const SparseMatrix& r);

/// Text container: header line, then one line per column with its nonzero
/// fine-DOF indices and hexfloat values.
void save_space(const MultiscaleSpace& space, std::ostream& out);
MultiscaleSpace load_space(std::istream& in);

}  // namespace dcflow
