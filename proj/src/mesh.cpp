#include <algorithm>
#include <string>

#include "dcflow/errors.hpp"
#include "dcflow/grid.hpp"
#include "dcflow/parallel.hpp"
#include "dcflow/pou.hpp"

namespace dcflow {

StructuredGrid::StructuredGrid(int nx, int ny, Rect domain) : nx_(nx), ny_(ny), domain_(domain)
{
    if (nx < 1 || ny < 1) throw InvalidArgument("grid element counts must be positive");
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
        throw InvalidArgument("grid domain must have positive extent");
}

std::array<int, 4> StructuredGrid::element_nodes(int e) const
{
    const auto [i, j] = element_ij(e);
    return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
}

Point StructuredGrid::node_point(int n) const
{
    const auto [i, j] = node_ij(n);
    return {domain_.x0 + i * hx(), domain_.y0 + j * hy()};
}

Point StructuredGrid::element_origin(int e) const
{
    const auto [i, j] = element_ij(e);
    return {domain_.x0 + i * hx(), domain_.y0 + j * hy()};
}

Point StructuredGrid::element_center(int e) const
{
    const auto [i, j] = element_ij(e);
    return {domain_.x0 + (i + 0.5) * hx(), domain_.y0 + (j + 0.5) * hy()};
}

bool StructuredGrid::is_boundary_node(int n) const
{
    const auto [i, j] = node_ij(n);
    return i == 0 || j == 0 || i == nx_ || j == ny_;
}

std::vector<char> StructuredGrid::boundary_mask() const
{
    std::vector<char> mask(num_nodes(), 0);
    for (int n = 0; n < num_nodes(); ++n) mask[n] = is_boundary_node(n) ? 1 : 0;
    return mask;
}

StructuredGrid build_fine_grid(int nx, int ny, Rect domain)
{
    if (nx < 2 || ny < 2)
        throw InvalidArgument("fine grid needs at least 2 elements per axis, got " + std::to_string(nx) +
                              "x" + std::to_string(ny));
    return StructuredGrid(nx, ny, domain);
}

int NestedGrids::fine_node_of_coarse_node(int coarse_node) const
{
    const auto [ci, cj] = coarse.node_ij(coarse_node);
    return fine.node(ci * ratio_x, cj * ratio_y);
}

std::vector<int> NestedGrids::fine_elements_in(int coarse_element) const
{
    const auto [ci, cj] = coarse.element_ij(coarse_element);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(ratio_x) * ratio_y);
    for (int j = cj * ratio_y; j < (cj + 1) * ratio_y; ++j)
        for (int i = ci * ratio_x; i < (ci + 1) * ratio_x; ++i) out.push_back(fine.element(i, j));
    return out;
}

NestedGrids build_coarse_grid(const StructuredGrid& fine, int nc) { return build_coarse_grid(fine, nc, nc); }

NestedGrids build_coarse_grid(const StructuredGrid& fine, int ncx, int ncy)
{
    if (ncx < 1 || ncy < 1) throw InvalidArgument("coarse element counts must be positive");
    if (fine.nx() % ncx != 0 || fine.ny() % ncy != 0)
        throw InvalidArgument("fine grid " + std::to_string(fine.nx()) + "x" + std::to_string(fine.ny()) +
                              " is not divisible by coarse grid " + std::to_string(ncx) + "x" +
                              std::to_string(ncy));
    NestedGrids g;
    g.fine = fine;
    g.coarse = StructuredGrid(ncx, ncy, fine.domain());
    g.ratio_x = fine.nx() / ncx;
    g.ratio_y = fine.ny() / ncy;
    g.fine_to_coarse.resize(fine.num_elements());
    for (int e = 0; e < fine.num_elements(); ++e) {
        const auto [i, j] = fine.element_ij(e);
        g.fine_to_coarse[e] = g.coarse.element(i / g.ratio_x, j / g.ratio_y);
    }
    return g;
}

CoarseNeighborhood coarse_neighborhood(const NestedGrids& grids, int coarse_node)
{
    const StructuredGrid& coarse = grids.coarse;
    const StructuredGrid& fine = grids.fine;
    if (coarse_node < 0 || coarse_node >= coarse.num_nodes())
        throw InvalidArgument("coarse node " + std::to_string(coarse_node) + " out of range");

    const auto [ci, cj] = coarse.node_ij(coarse_node);
    CoarseNeighborhood nb;
    nb.center = coarse_node;
    for (int ej = cj - 1; ej <= cj; ++ej)
        for (int ei = ci - 1; ei <= ci; ++ei)
            if (ei >= 0 && ej >= 0 && ei < coarse.nx() && ej < coarse.ny())
                nb.coarse_elements.push_back(coarse.element(ei, ej));

    const int lo_i = std::max(ci - 1, 0), hi_i = std::min(ci + 1, coarse.nx());
    const int lo_j = std::max(cj - 1, 0), hi_j = std::min(cj + 1, coarse.ny());
    nb.patch = {lo_i * grids.ratio_x, lo_j * grids.ratio_y, hi_i * grids.ratio_x, hi_j * grids.ratio_y};

    const NodePatch& p = nb.patch;
    nb.fine_nodes.reserve(p.size());
    for (int j = p.j0; j <= p.j1; ++j)
        for (int i = p.i0; i <= p.i1; ++i) {
            nb.fine_nodes.push_back(fine.node(i, j));
            if (!p.on_boundary(i, j)) nb.interior_nodes.push_back(fine.node(i, j));
        }

    // counterclockwise walk starting at the lower-left corner
    for (int i = p.i0; i < p.i1; ++i) nb.boundary_nodes.push_back(fine.node(i, p.j0));
    for (int j = p.j0; j < p.j1; ++j) nb.boundary_nodes.push_back(fine.node(p.i1, j));
    for (int i = p.i1; i > p.i0; --i) nb.boundary_nodes.push_back(fine.node(i, p.j1));
    for (int j = p.j1; j > p.j0; --j) nb.boundary_nodes.push_back(fine.node(p.i0, j));
    return nb;
}

std::vector<int> interior_coarse_nodes(const StructuredGrid& coarse)
{
    std::vector<int> out;
    for (int n = 0; n < coarse.num_nodes(); ++n)
        if (!coarse.is_boundary_node(n)) out.push_back(n);
    return out;
}

StructuredGrid patch_grid(const StructuredGrid& parent, const NodePatch& patch)
{
    const Rect d = parent.domain();
    const Rect sub{d.x0 + patch.i0 * parent.hx(), d.y0 + patch.j0 * parent.hy(), d.x0 + patch.i1 * parent.hx(),
                   d.y0 + patch.j1 * parent.hy()};
    return StructuredGrid(patch.i1 - patch.i0, patch.j1 - patch.j0, sub);
}

// ---------------------------------------------------------------------------
// partition of unity

PartitionOfUnity::PartitionOfUnity(const NestedGrids& grids,
                                   std::vector<std::array<std::vector<double>, 4>> element_values)
    : fine_(grids.fine),
      coarse_(grids.coarse),
      rx_(grids.ratio_x),
      ry_(grids.ratio_y),
      values_(std::move(element_values))
{
    if (static_cast<int>(values_.size()) != coarse_.num_elements())
        throw InvalidArgument("partition of unity needs values for every coarse element");
}

NodePatch PartitionOfUnity::element_patch(int coarse_element) const
{
    const auto [ci, cj] = coarse_.element_ij(coarse_element);
    return {ci * rx_, cj * ry_, (ci + 1) * rx_, (cj + 1) * ry_};
}

Vector PartitionOfUnity::on_patch(int coarse_node, const NodePatch& patch) const
{
    Vector out = Vector::Zero(patch.size());
    const auto [ci, cj] = coarse_.node_ij(coarse_node);
    for (int ej = cj - 1; ej <= cj; ++ej)
        for (int ei = ci - 1; ei <= ci; ++ei) {
            if (ei < 0 || ej < 0 || ei >= coarse_.nx() || ej >= coarse_.ny()) continue;
            const int ce = coarse_.element(ei, ej);
            const auto corners = coarse_.element_nodes(ce);
            const int corner = static_cast<int>(std::find(corners.begin(), corners.end(), coarse_node) - corners.begin());
            const NodePatch ep = element_patch(ce);
            const auto& vals = values_[ce][corner];
            for (int j = ep.j0; j <= ep.j1; ++j)
                for (int i = ep.i0; i <= ep.i1; ++i)
                    if (patch.contains(i, j)) out[patch.local(i, j)] = vals[ep.local(i, j)];
        }
    return out;
}

Vector PartitionOfUnity::field(int coarse_node) const
{
    const NodePatch all{0, 0, fine_.nx(), fine_.ny()};
    return on_patch(coarse_node, all);
}

Vector PartitionOfUnity::sum() const
{
    Vector total = Vector::Zero(fine_.num_nodes());
    std::vector<char> seen(fine_.num_nodes(), 0);
    // every fine node gets its value from the first coarse element that covers it
    for (int ce = 0; ce < coarse_.num_elements(); ++ce) {
        const NodePatch ep = element_patch(ce);
        for (int j = ep.j0; j <= ep.j1; ++j)
            for (int i = ep.i0; i <= ep.i1; ++i) {
                const int n = fine_.node(i, j);
                if (seen[n]) continue;
                seen[n] = 1;
                for (int c = 0; c < 4; ++c) total[n] += values_[ce][c][ep.local(i, j)];
            }
    }
    return total;
}

namespace {

std::array<double, 4> hat_values(double s, double t)
{
    return {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
}

}  // namespace

PartitionOfUnity partition_of_unity(const NestedGrids& grids, const QuadField& kappa, PouMode mode)
{
    const StructuredGrid& fine = grids.fine;
    const StructuredGrid& coarse = grids.coarse;
    if (kappa.num_elements() != fine.num_elements())
        throw InvalidArgument("partition_of_unity: coefficient does not match the fine grid");
    if (!(kappa.min() > 0.0)) throw InvalidArgument("partition_of_unity: coefficient must be positive");

    const int rx = grids.ratio_x, ry = grids.ratio_y;
    std::vector<std::array<std::vector<double>, 4>> values(coarse.num_elements());

    parallel_for(static_cast<std::size_t>(coarse.num_elements()), [&](std::size_t idx) {
        const int ce = static_cast<int>(idx);
        const auto [ci, cj] = coarse.element_ij(ce);
        const NodePatch ep{ci * rx, cj * ry, (ci + 1) * rx, (cj + 1) * ry};
        const int n = ep.size();
        for (auto& v : values[ce]) v.assign(n, 0.0);

        // bilinear data everywhere; in multiscale mode the interior is replaced below
        for (int j = 0; j < ep.nodes_y(); ++j)
            for (int i = 0; i < ep.nodes_x(); ++i) {
                const auto h = hat_values(static_cast<double>(i) / rx, static_cast<double>(j) / ry);
                for (int c = 0; c < 4; ++c) values[ce][c][j * ep.nodes_x() + i] = h[c];
            }
        if (mode == PouMode::Bilinear || rx < 2 || ry < 2) return;

        const StructuredGrid local = patch_grid(fine, ep);
        const QuadField k = kappa.restricted(fine.nx(), ci * rx, cj * ry, rx, ry);
        const SparseMatrix a = assemble_stiffness(local, k);

        std::vector<int> interior, to_interior(n, -1);
        for (int j = 1; j < ep.nodes_y() - 1; ++j)
            for (int i = 1; i < ep.nodes_x() - 1; ++i) {
                to_interior[j * ep.nodes_x() + i] = static_cast<int>(interior.size());
                interior.push_back(j * ep.nodes_x() + i);
            }
        const int ni = static_cast<int>(interior.size());
        std::vector<Eigen::Triplet<double>> trip;
        Matrix rhs = Matrix::Zero(ni, 4);
        for (int col = 0; col < a.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
                const int r = to_interior[it.row()];
                if (r < 0) continue;
                const int c = to_interior[col];
                if (c >= 0) {
                    trip.emplace_back(r, c, it.value());
                } else {
                    for (int corner = 0; corner < 4; ++corner)
                        rhs(r, corner) -= it.value() * values[ce][corner][col];
                }
            }
        SparseMatrix aii(ni, ni);
        aii.setFromTriplets(trip.begin(), trip.end());
        const Matrix sol = SparseFactorization(aii).solve(rhs);
        for (int corner = 0; corner < 4; ++corner)
            for (int r = 0; r < ni; ++r) values[ce][corner][interior[r]] = sol(r, corner);
    });
    return PartitionOfUnity(grids, std::move(values));
}

}  // namespace dcflow
