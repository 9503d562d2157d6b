#pragma once

#include <array>
#include <vector>

#include "dcflow/fem.hpp"
#include "dcflow/grid.hpp"

namespace dcflow {

enum class PouMode { Multiscale, Bilinear };

/// Partition-of-unity functions chi_l, one per coarse node, for one continuum.
///
/// Stored per coarse element: the four functions that are nonzero on it (one
/// per corner, counterclockwise from the lower-left), as nodal values on the
/// element's fine-node patch.
class PartitionOfUnity {
public:
    PartitionOfUnity() = default;
    PartitionOfUnity(const NestedGrids& grids, std::vector<std::array<std::vector<double>, 4>> element_values);

    /// Values of corner `corner` of `coarse_element` on that element's patch (row-major).
    const std::vector<double>& element_values(int coarse_element, int corner) const
    {
        return values_[coarse_element][corner];
    }
    NodePatch element_patch(int coarse_element) const;

    /// chi_l as a full fine nodal field.
    Vector field(int coarse_node) const;
    /// chi_l restricted to a node patch (row-major); zero outside its support.
    Vector on_patch(int coarse_node, const NodePatch& patch) const;
    /// sum_l chi_l at every fine node.
    Vector sum() const;

    const StructuredGrid& fine() const { return fine_; }
    const StructuredGrid& coarse() const { return coarse_; }
    int ratio_x() const { return rx_; }
    int ratio_y() const { return ry_; }

private:
    StructuredGrid fine_;
    StructuredGrid coarse_;
    int rx_ = 1;
    int ry_ = 1;
    std::vector<std::array<std::vector<double>, 4>> values_;
};

/// Builds chi for a continuum with conductivity `kappa` (sampled on the fine grid).
/// Multiscale mode solves -div(kappa grad chi) = 0 in every coarse element with
/// bilinear boundary data; bilinear mode returns the standard hats.
PartitionOfUnity partition_of_unity(const NestedGrids& grids, const QuadField& kappa, PouMode mode);

}  // namespace dcflow
