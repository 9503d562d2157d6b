#pragma once

#include <array>
#include <utility>
#include <vector>

namespace dcflow {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

/// Uniform tensor-product grid of nx x ny rectangular elements.
///
/// Nodes and elements are numbered row-major starting from the bottom row:
/// node (i, j) -> j * (nx + 1) + i, element (i, j) -> j * nx + i. Element
/// corners are listed counterclockwise from the lower-left node.
class StructuredGrid {
public:
    StructuredGrid() = default;
    StructuredGrid(int nx, int ny, Rect domain = {});

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const Rect& domain() const { return domain_; }
    double hx() const { return domain_.width() / nx_; }
    double hy() const { return domain_.height() / ny_; }

    int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
    int num_elements() const { return nx_ * ny_; }
    int num_interior_nodes() const { return (nx_ - 1) * (ny_ - 1); }

    int node(int i, int j) const { return j * (nx_ + 1) + i; }
    int element(int i, int j) const { return j * nx_ + i; }
    std::pair<int, int> node_ij(int n) const { return {n % (nx_ + 1), n / (nx_ + 1)}; }
    std::pair<int, int> element_ij(int e) const { return {e % nx_, e / nx_}; }

    std::array<int, 4> element_nodes(int e) const;
    Point node_point(int n) const;
    Point element_origin(int e) const;
    Point element_center(int e) const;

    bool is_boundary_node(int n) const;
    /// 1 for nodes on the domain boundary, 0 otherwise.
    std::vector<char> boundary_mask() const;

private:
    int nx_ = 0;
    int ny_ = 0;
    Rect domain_{};
};

StructuredGrid build_fine_grid(int nx, int ny, Rect domain = {});

/// Fine grid together with a coarse grid it refines.
struct NestedGrids {
    StructuredGrid fine;
    StructuredGrid coarse;
    int ratio_x = 1;  ///< fine elements per coarse element along x
    int ratio_y = 1;
    std::vector<int> fine_to_coarse;  ///< coarse element owning each fine element

    int fine_node_of_coarse_node(int coarse_node) const;
    std::vector<int> fine_elements_in(int coarse_element) const;
};

/// Coarsens `fine` to nc x nc elements. Fine counts must be divisible by nc.
NestedGrids build_coarse_grid(const StructuredGrid& fine, int nc);
NestedGrids build_coarse_grid(const StructuredGrid& fine, int ncx, int ncy);

/// Inclusive rectangle of fine node indices [i0, i1] x [j0, j1].
struct NodePatch {
    int i0 = 0;
    int j0 = 0;
    int i1 = 0;
    int j1 = 0;

    int nodes_x() const { return i1 - i0 + 1; }
    int nodes_y() const { return j1 - j0 + 1; }
    int size() const { return nodes_x() * nodes_y(); }
    int local(int i, int j) const { return (j - j0) * nodes_x() + (i - i0); }
    bool contains(int i, int j) const { return i >= i0 && i <= i1 && j >= j0 && j <= j1; }
    bool on_boundary(int i, int j) const { return i == i0 || i == i1 || j == j0 || j == j1; }
};

/// Union of the coarse elements sharing one coarse node.
struct CoarseNeighborhood {
    int center = -1;                  ///< coarse node index
    std::vector<int> coarse_elements;  ///< ascending
    NodePatch patch;                   ///< fine-node rectangle covered by the neighborhood
    std::vector<int> fine_nodes;       ///< global fine nodes, patch row-major order
    std::vector<int> boundary_nodes;   ///< fine nodes on the patch boundary, counterclockwise from the lower-left corner
    std::vector<int> interior_nodes;   ///< global fine nodes strictly inside, patch row-major order
};

CoarseNeighborhood coarse_neighborhood(const NestedGrids& grids, int coarse_node);

/// Coarse nodes not on the domain boundary, ascending.
std::vector<int> interior_coarse_nodes(const StructuredGrid& coarse);

/// Grid covering a node patch of `parent`, with matching geometry.
StructuredGrid patch_grid(const StructuredGrid& parent, const NodePatch& patch);

}  // namespace dcflow
