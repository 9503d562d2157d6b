#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dcflow/errors.hpp"
#include "dcflow/gmsfem.hpp"
#include "dcflow/parallel.hpp"

namespace dcflow {

std::string to_string(BasisMode mode) { return mode == BasisMode::Coupled ? "coupled" : "uncoupled"; }

BasisMode parse_basis_mode(const std::string& s)
{
    if (s == "coupled") return BasisMode::Coupled;
    if (s == "uncoupled") return BasisMode::Uncoupled;
    throw InvalidArgument("unknown basis mode '" + s + "' (expected coupled or uncoupled)");
}

namespace {

StructuredGrid grid_of(const NestedGrids& grids, const NodePatch& p) { return patch_grid(grids.fine, p); }

QuadField on_patch(const NestedGrids& grids, const QuadField& f, const NodePatch& p)
{
    return f.restricted(grids.fine.nx(), p.i0, p.j0, p.i1 - p.i0, p.j1 - p.j0);
}

std::vector<int> boundary_local(const NestedGrids& grids, const CoarseNeighborhood& nb)
{
    std::vector<int> out;
    out.reserve(nb.boundary_nodes.size());
    for (int g : nb.boundary_nodes) {
        const auto [i, j] = grids.fine.node_ij(g);
        out.push_back(nb.patch.local(i, j));
    }
    return out;
}

/// Columns equal to the unit spike at bnd[k] on the boundary and K-harmonic inside.
Matrix harmonic_extension(const SparseMatrix& k, const std::vector<int>& bnd)
{
    const int n = static_cast<int>(k.rows());
    std::vector<int> col_of(n, -1);
    for (std::size_t c = 0; c < bnd.size(); ++c) col_of[bnd[c]] = static_cast<int>(c);
    std::vector<int> interior, to_interior(n, -1);
    for (int r = 0; r < n; ++r)
        if (col_of[r] < 0) {
            to_interior[r] = static_cast<int>(interior.size());
            interior.push_back(r);
        }
    const int ni = static_cast<int>(interior.size());
    const int nb = static_cast<int>(bnd.size());
    std::vector<Eigen::Triplet<double>> trip;
    Matrix rhs = Matrix::Zero(ni, nb);
    for (int col = 0; col < k.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int r = to_interior[it.row()];
            if (r < 0) continue;
            if (to_interior[col] >= 0)
                trip.emplace_back(r, to_interior[col], it.value());
            else
                rhs(r, col_of[col]) -= it.value();
        }
    Matrix phi = Matrix::Zero(n, nb);
    for (int c = 0; c < nb; ++c) phi(bnd[c], c) = 1.0;
    if (ni > 0) {
        SparseMatrix kii(ni, ni);
        kii.setFromTriplets(trip.begin(), trip.end());
        const Matrix x = SparseFactorization(kii).solve(rhs);
        for (int r = 0; r < ni; ++r) phi.row(interior[r]) = x.row(r);
    }
    return phi;
}

SparseMatrix stack2x2(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c, const SparseMatrix& d)
{
    const int n = static_cast<int>(a.rows());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros() + b.nonZeros() + c.nonZeros() + d.nonZeros()));
    const std::array<const SparseMatrix*, 4> blocks{&a, &b, &c, &d};
    for (int q = 0; q < 4; ++q) {
        const int ro = (q / 2) * n, co = (q % 2) * n;
        const SparseMatrix& m = *blocks[q];
        for (int col = 0; col < m.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(m, col); it; ++it)
                trip.emplace_back(ro + static_cast<int>(it.row()), co + col, it.value());
    }
    SparseMatrix out(2 * n, 2 * n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SparseMatrix block_diag(const SparseMatrix& a, const SparseMatrix& d)
{
    const SparseMatrix z(a.rows(), a.cols());
    return stack2x2(a, z, z, d);
}

}  // namespace

SnapshotSpace uncoupled_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, const QuadField& kappa,
                                  int continuum)
{
    if (!(kappa.min() > 0.0)) throw InvalidArgument("uncoupled_snapshots: conductivity must be positive");
    SnapshotSpace s;
    s.neighborhood = nb.center;
    s.mode = BasisMode::Uncoupled;
    s.continuum = continuum;
    s.patch = nb.patch;
    s.boundary_local = boundary_local(grids, nb);
    const StructuredGrid pg = grid_of(grids, nb.patch);
    s.vectors = harmonic_extension(assemble_stiffness(pg, on_patch(grids, kappa, nb.patch)), s.boundary_local);
    return s;
}

SnapshotSpace coupled_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, const QuadField& kappa1,
                                const QuadField& kappa2, const QuadField& cs)
{
    if (cs.min() < 0.0) throw InvalidArgument("coupled_snapshots: transfer coefficient must be nonnegative");
    SnapshotSpace s;
    s.neighborhood = nb.center;
    s.mode = BasisMode::Coupled;
    s.continuum = -1;
    s.patch = nb.patch;
    s.boundary_local = boundary_local(grids, nb);
    const StructuredGrid pg = grid_of(grids, nb.patch);
    const SparseMatrix k1 = assemble_stiffness(pg, on_patch(grids, kappa1, nb.patch));
    const SparseMatrix k2 = assemble_stiffness(pg, on_patch(grids, kappa2, nb.patch));
    const SparseMatrix mc = assemble_mass(pg, on_patch(grids, cs, nb.patch));
    const SparseMatrix k = stack2x2(k1 + mc, -mc, -mc, k2 + mc);
    const int np = nb.patch.size();
    std::vector<int> bnd = s.boundary_local;
    for (int b : s.boundary_local) bnd.push_back(np + b);
    s.vectors = harmonic_extension(k, bnd);
    return s;
}

SnapshotSpace local_fine_snapshots(const NestedGrids& grids, const CoarseNeighborhood& nb, BasisMode mode,
                                   int continuum)
{
    SnapshotSpace s;
    s.neighborhood = nb.center;
    s.mode = mode;
    s.continuum = mode == BasisMode::Coupled ? -1 : continuum;
    s.patch = nb.patch;
    s.boundary_local = boundary_local(grids, nb);
    const int n = nb.patch.size() * (mode == BasisMode::Coupled ? 2 : 1);
    s.vectors = Matrix::Identity(n, n);
    return s;
}

QuadField spectral_weight(const PartitionOfUnity& pou, const QuadField& kappa)
{
    const StructuredGrid& fine = pou.fine();
    if (kappa.num_elements() != fine.num_elements())
        throw InvalidArgument("spectral_weight: coefficient does not match the fine grid");
    const int rx = pou.ratio_x(), ry = pou.ratio_y();
    const QuadratureRule& rule = kappa.rule();
    QuadField out = kappa;
    for (int e = 0; e < fine.num_elements(); ++e) {
        const auto [fi, fj] = fine.element_ij(e);
        const int ce = pou.coarse().element(fi / rx, fj / ry);
        const NodePatch ep = pou.element_patch(ce);
        const std::array<int, 4> loc{ep.local(fi, fj), ep.local(fi + 1, fj), ep.local(fi + 1, fj + 1),
                                     ep.local(fi, fj + 1)};
        for (int q = 0; q < rule.size(); ++q) {
            const auto g = q1_gradients(rule.xi[q], rule.eta[q], fine.hx(), fine.hy());
            double sum = 0.0;
            for (int c = 0; c < 4; ++c) {
                const auto& v = pou.element_values(ce, c);
                double gx = 0.0, gy = 0.0;
                for (int a = 0; a < 4; ++a) {
                    gx += v[loc[a]] * g[a][0];
                    gy += v[loc[a]] * g[a][1];
                }
                sum += gx * gx + gy * gy;
            }
            out(e, q) = kappa(e, q) * sum;
        }
    }
    return out;
}

EigenPairs spectral_decompose(const NestedGrids& grids, const SnapshotSpace& space,
                              const std::array<QuadField, 2>& kappa, const std::array<QuadField, 2>& weight, int m)
{
    if (space.size() == 0) throw InvalidArgument("spectral_decompose: empty snapshot space");
    if (m < 1 || m > space.size())
        throw InvalidArgument("spectral_decompose: requested " + std::to_string(m) + " eigenpairs from a space of " +
                              std::to_string(space.size()));
    const StructuredGrid pg = grid_of(grids, space.patch);
    SparseMatrix a, s;
    if (space.mode == BasisMode::Uncoupled) {
        const int c = space.continuum;
        a = assemble_stiffness(pg, on_patch(grids, kappa[c], space.patch));
        s = assemble_mass(pg, on_patch(grids, weight[c], space.patch));
    } else {
        a = block_diag(assemble_stiffness(pg, on_patch(grids, kappa[0], space.patch)),
                       assemble_stiffness(pg, on_patch(grids, kappa[1], space.patch)));
        s = block_diag(assemble_mass(pg, on_patch(grids, weight[0], space.patch)),
                       assemble_mass(pg, on_patch(grids, weight[1], space.patch)));
    }
    const Matrix& phi = space.vectors;
    Matrix as = phi.transpose() * (a * phi);
    Matrix ss = phi.transpose() * (s * phi);
    as = 0.5 * (as + as.transpose()).eval();
    ss = 0.5 * (ss + ss.transpose()).eval();
    EigenPairs local;
    try {
        local = generalized_eigs(as, ss, m);
    } catch (const DecompositionFailure& e) {
        throw DecompositionFailure("spectral problem of neighborhood " + std::to_string(space.neighborhood) + ": " +
                                   e.what());
    }
    return {local.values, phi * local.vectors};
}

// ---------------------------------------------------------------------------

OfflineBasis build_offline_basis(const FlowProblem& problem, const NestedGrids& grids, const DualPressure& frozen,
                                 const OfflineOptions& options)
{
    const StructuredGrid& fine = grids.fine;
    if (fine.nx() != problem.grid().nx() || fine.ny() != problem.grid().ny())
        throw InvalidArgument("offline basis: nested grids do not match the problem grid");
    if (options.max_per_node < 1) throw InvalidArgument("offline basis: need at least one function per node");

    const FrozenCoefficients fc =
        eval_coefficients(problem.model(), fine, frozen.p1, frozen.p2, options.quadrature_order);
    OfflineBasis ob;
    ob.options = options;
    ob.grids = grids;
    for (int i = 0; i < 2; ++i) ob.pou[i] = partition_of_unity(grids, fc.kappa[i], options.pou);
    const std::array<QuadField, 2> weight{spectral_weight(ob.pou[0], fc.kappa[0]),
                                          spectral_weight(ob.pou[1], fc.kappa[1])};
    const QuadField cs = 0.5 * (fc.c[0] + fc.c[1]);

    ob.nodes = interior_coarse_nodes(grids.coarse);
    const std::size_t nn = ob.nodes.size();
    ob.patches.resize(nn);
    ob.modes.resize(nn);
    ob.eigenvalues.resize(nn);
    parallel_for(nn, [&](std::size_t idx) {
        const CoarseNeighborhood nb = coarse_neighborhood(grids, ob.nodes[idx]);
        ob.patches[idx] = nb.patch;
        auto keep = [&](const SnapshotSpace& s, int slot) {
            const EigenPairs ep = spectral_decompose(grids, s, fc.kappa, weight, std::min(options.max_per_node, s.size()));
            ob.modes[idx][slot] = ep.vectors;
            ob.eigenvalues[idx][slot] = ep.values;
        };
        const bool fine_snap = options.snapshots == SnapshotKind::LocalFine;
        if (options.mode == BasisMode::Coupled) {
            keep(fine_snap ? local_fine_snapshots(grids, nb, BasisMode::Coupled)
                           : coupled_snapshots(grids, nb, fc.kappa[0], fc.kappa[1], cs),
                 0);
        } else {
            for (int c = 0; c < 2; ++c)
                keep(fine_snap ? local_fine_snapshots(grids, nb, BasisMode::Uncoupled, c)
                               : uncoupled_snapshots(grids, nb, fc.kappa[c], c),
                     c);
        }
    });
    return ob;
}

int basis_per_node(BasisMode mode, int dim, int num_nodes)
{
    const int per = mode == BasisMode::Coupled ? num_nodes : 2 * num_nodes;
    if (num_nodes < 1 || dim < per || dim % per != 0)
        throw InvalidArgument("dim " + std::to_string(dim) + " is not a positive multiple of " + std::to_string(per) +
                              " for " + to_string(mode) + " mode on " + std::to_string(num_nodes) + " coarse nodes");
    return dim / per;
}

MultiscaleSpace build_multiscale_space(const OfflineBasis& offline, int per_node)
{
    const BasisMode mode = offline.options.mode;
    const NestedGrids& grids = offline.grids;
    const int nn = grids.fine.num_nodes();
    if (per_node < 1) throw InvalidArgument("need at least one basis function per node");

    struct NodeColumns {
        std::vector<Vector> values;  // stacked patch values
        std::vector<MultiscaleSpace::Column> meta;
        std::vector<std::string> warnings;
    };
    std::vector<NodeColumns> per(offline.nodes.size());

    parallel_for(offline.nodes.size(), [&](std::size_t idx) {
        const int node = offline.nodes[idx];
        const NodePatch& patch = offline.patches[idx];
        const int np = patch.size();
        const std::array<Vector, 2> chi{offline.pou[0].on_patch(node, patch), offline.pou[1].on_patch(node, patch)};
        std::vector<Vector> cand;
        std::vector<MultiscaleSpace::Column> meta;
        const int slots = mode == BasisMode::Coupled ? 1 : 2;
        for (int slot = 0; slot < slots; ++slot) {
            const Matrix& m = offline.modes[idx][slot];
            if (per_node > m.cols())
                throw InvalidArgument("requested " + std::to_string(per_node) + " basis functions per node, offline basis has " +
                                      std::to_string(m.cols()));
            for (int k = 0; k < per_node; ++k) {
                Vector v = Vector::Zero(2 * np);
                if (mode == BasisMode::Coupled) {
                    v.head(np) = chi[0].cwiseProduct(m.col(k).head(np));
                    v.tail(np) = chi[1].cwiseProduct(m.col(k).tail(np));
                } else {
                    v.segment(slot * np, np) = chi[slot].cwiseProduct(m.col(k));
                }
                cand.push_back(std::move(v));
                meta.push_back({node, mode == BasisMode::Coupled ? -1 : slot, k});
            }
        }
        // keep columns in order, dropping those (numerically) in the span of earlier ones
        std::vector<Vector> ortho;
        NodeColumns& out = per[idx];
        for (std::size_t c = 0; c < cand.size(); ++c) {
            Vector w = cand[c];
            const double n0 = w.norm();
            for (int pass = 0; pass < 2; ++pass)
                for (const Vector& q : ortho) w -= q.dot(w) * q;
            const double n1 = w.norm();
            if (n0 == 0.0 || n1 <= 1e-10 * n0) {
                out.warnings.push_back("dropped dependent column " + std::to_string(meta[c].index) + " (continuum " +
                                       std::to_string(meta[c].continuum) + ") at coarse node " + std::to_string(node));
                continue;
            }
            ortho.push_back(w / n1);
            out.values.push_back(std::move(cand[c]));
            out.meta.push_back(meta[c]);
        }
    });

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<MultiscaleSpace::Column> columns;
    std::vector<std::string> warnings;
    for (std::size_t idx = 0; idx < per.size(); ++idx) {
        const NodePatch& patch = offline.patches[idx];
        const int np = patch.size();
        for (std::size_t c = 0; c < per[idx].values.size(); ++c) {
            const int col = static_cast<int>(columns.size());
            const Vector& v = per[idx].values[c];
            for (int comp = 0; comp < 2; ++comp)
                for (int j = patch.j0; j <= patch.j1; ++j)
                    for (int i = patch.i0; i <= patch.i1; ++i) {
                        const double x = v[comp * np + patch.local(i, j)];
                        if (x != 0.0) trip.emplace_back(comp * nn + grids.fine.node(i, j), col, x);
                    }
            columns.push_back(per[idx].meta[c]);
        }
        warnings.insert(warnings.end(), per[idx].warnings.begin(), per[idx].warnings.end());
    }
    SparseMatrix r(2 * nn, static_cast<int>(columns.size()));
    r.setFromTriplets(trip.begin(), trip.end());
    return MultiscaleSpace(grids, mode, std::move(r), std::move(columns), std::move(warnings));
}

MultiscaleSpace build_multiscale_space(const FlowProblem& problem, const NestedGrids& grids, const DualPressure& frozen,
                                       BasisMode mode, int per_node)
{
    OfflineOptions opt;
    opt.mode = mode;
    opt.max_per_node = per_node;
    return build_multiscale_space(build_offline_basis(problem, grids, frozen, opt), per_node);
}

// ---------------------------------------------------------------------------

MultiscaleSpace::MultiscaleSpace(NestedGrids grids, BasisMode mode, SparseMatrix r, std::vector<Column> columns,
                                 std::vector<std::string> warnings)
    : grids_(std::move(grids)),
      mode_(mode),
      r_(std::move(r)),
      columns_(std::move(columns)),
      warnings_(std::move(warnings))
{
    const StructuredGrid& fine = grids_.fine;
    const int nn = fine.num_nodes();
    if (r_.rows() != 2 * nn) throw InvalidArgument("prolongation rows do not match the fine grid");
    if (static_cast<int>(columns_.size()) != r_.cols()) throw InvalidArgument("column metadata size mismatch");
    if (r_.cols() == 0) throw InvalidArgument("multiscale space has no columns");
    r_.makeCompressed();
    rt_ = r_.transpose();

    const StructuredGrid& coarse = grids_.coarse;
    const int rx = grids_.ratio_x, ry = grids_.ratio_y;
    const int npk = (rx + 1) * (ry + 1);
    std::vector<std::map<int, std::vector<std::pair<int, double>>>> touch(coarse.num_elements());
    for (int col = 0; col < r_.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(r_, col); it; ++it) {
            const int dof = static_cast<int>(it.row());
            const int comp = dof / nn;
            const auto [fi, fj] = fine.node_ij(dof % nn);
            for (int ci = std::max(0, (fi - 1) / rx); ci <= std::min(coarse.nx() - 1, fi / rx); ++ci)
                for (int cj = std::max(0, (fj - 1) / ry); cj <= std::min(coarse.ny() - 1, fj / ry); ++cj) {
                    if (fi < ci * rx || fi > (ci + 1) * rx || fj < cj * ry || fj > (cj + 1) * ry) continue;
                    const int local = (fj - cj * ry) * (rx + 1) + (fi - ci * rx);
                    touch[coarse.element(ci, cj)][col].emplace_back(comp * npk + local, it.value());
                }
        }
    blocks_.resize(coarse.num_elements());
    for (int ce = 0; ce < coarse.num_elements(); ++ce) {
        ElementBlock& b = blocks_[ce];
        b.values = Matrix::Zero(2 * npk, static_cast<int>(touch[ce].size()));
        int k = 0;
        for (const auto& [col, entries] : touch[ce]) {
            b.columns.push_back(col);
            for (const auto& [row, v] : entries) b.values(row, k) = v;
            ++k;
        }
    }
}

std::string MultiscaleSpace::name() const { return "gmsfem-" + to_string(mode_); }

SparseMatrix MultiscaleSpace::coarse_operator(const FlowProblem& problem, const FrozenCoefficients& fc, double tau) const
{
    const StructuredGrid& fine = problem.grid();
    if (fine.nx() != grids_.fine.nx() || fine.ny() != grids_.fine.ny())
        throw InvalidArgument("multiscale space was built for a different grid");
    const StructuredGrid& coarse = grids_.coarse;
    const int rx = grids_.ratio_x, ry = grids_.ratio_y;
    std::vector<Matrix> local(coarse.num_elements());
    parallel_for(static_cast<std::size_t>(coarse.num_elements()), [&](std::size_t idx) {
        const int ce = static_cast<int>(idx);
        const ElementBlock& b = blocks_[ce];
        if (b.columns.empty()) return;
        const auto [ci, cj] = coarse.element_ij(ce);
        const NodePatch ep{ci * rx, cj * ry, (ci + 1) * rx, (cj + 1) * ry};
        const FrozenCoefficients sub = restrict_coefficients(fc, fine.nx(), ci * rx, cj * ry, rx, ry);
        const SparseMatrix a = FlowProblem::block_operator(patch_grid(fine, ep), sub, tau);
        const Matrix av = a * b.values;
        local[ce].noalias() = b.values.transpose() * av;
    });
    std::vector<Eigen::Triplet<double>> trip;
    for (int ce = 0; ce < coarse.num_elements(); ++ce) {
        const ElementBlock& b = blocks_[ce];
        const int m = static_cast<int>(b.columns.size());
        for (int c = 0; c < m; ++c)
            for (int r = 0; r < m; ++r) trip.emplace_back(b.columns[r], b.columns[c], local[ce](r, c));
    }
    SparseMatrix out(dim(), dim());
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

Vector MultiscaleSpace::solve(const FlowProblem& problem, const FrozenCoefficients& fc, const Vector& rhs,
                              double tau) const
{
    const SparseMatrix a = coarse_operator(problem, fc, tau);
    const Vector u = SparseFactorization(a).solve(Vector(rt_ * rhs));
    return r_ * u;
}

Vector MultiscaleSpace::project(const FlowProblem&, const Vector& fine) const { return rt_ * fine; }

Vector coarse_solve_system(const SparseMatrix& a, const Vector& rhs, const SparseMatrix& r)
{
    if (a.rows() != r.rows() || rhs.size() != a.rows()) throw InvalidArgument("coarse_solve_system: size mismatch");
    const SparseMatrix rt = r.transpose();
    const SparseMatrix ac = rt * a * r;
    return r * solve_sparse(ac, Vector(rt * rhs));
}

// ---------------------------------------------------------------------------

namespace {

std::string hex(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& tok)
{
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw InvalidArgument("space file: bad number '" + tok + "'");
    return v;
}

}  // namespace

void save_space(const MultiscaleSpace& space, std::ostream& out)
{
    const NestedGrids& g = space.grids();
    const Rect& d = g.fine.domain();
    out << "dcflow-space 1 " << to_string(space.mode()) << ' ' << g.fine.nx() << ' ' << g.fine.ny() << ' '
        << g.coarse.nx() << ' ' << g.coarse.ny() << ' ' << hex(d.x0) << ' ' << hex(d.y0) << ' ' << hex(d.x1) << ' '
        << hex(d.y1) << ' ' << space.dim() << '\n';
    const SparseMatrix& r = space.prolongation();
    for (int col = 0; col < r.outerSize(); ++col) {
        const auto& c = space.columns()[col];
        int nnz = 0;
        for (SparseMatrix::InnerIterator it(r, col); it; ++it) ++nnz;
        out << c.coarse_node << ' ' << c.continuum << ' ' << c.index << ' ' << nnz;
        for (SparseMatrix::InnerIterator it(r, col); it; ++it) out << ' ' << it.row() << ' ' << hex(it.value());
        out << '\n';
    }
}

MultiscaleSpace load_space(std::istream& in)
{
    std::string magic, mode, x0, y0, x1, y1;
    int version = 0, fnx = 0, fny = 0, cnx = 0, cny = 0, ncols = 0;
    if (!(in >> magic >> version >> mode >> fnx >> fny >> cnx >> cny >> x0 >> y0 >> x1 >> y1 >> ncols) ||
        magic != "dcflow-space" || version != 1)
        throw InvalidArgument("not a dcflow space file (bad header)");
    const StructuredGrid fine(fnx, fny, Rect{parse_double(x0), parse_double(y0), parse_double(x1), parse_double(y1)});
    NestedGrids grids = build_coarse_grid(fine, cnx, cny);
    const int nn = fine.num_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<MultiscaleSpace::Column> cols;
    for (int col = 0; col < ncols; ++col) {
        MultiscaleSpace::Column c;
        int nnz = 0;
        if (!(in >> c.coarse_node >> c.continuum >> c.index >> nnz) || nnz < 0)
            throw InvalidArgument("space file: truncated column " + std::to_string(col));
        for (int k = 0; k < nnz; ++k) {
            int row = 0;
            std::string v;
            if (!(in >> row >> v) || row < 0 || row >= 2 * nn)
                throw InvalidArgument("space file: bad entry in column " + std::to_string(col));
            trip.emplace_back(row, col, parse_double(v));
        }
        cols.push_back(c);
    }
    SparseMatrix r(2 * nn, ncols);
    r.setFromTriplets(trip.begin(), trip.end());
    return MultiscaleSpace(std::move(grids), parse_basis_mode(mode), std::move(r), std::move(cols));
}

}  // namespace dcflow
