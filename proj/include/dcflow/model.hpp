#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcflow/fem.hpp"
#include "dcflow/grid.hpp"

namespace dcflow {

/// One value per element of an nx x ny grid, row-major from the bottom row.
struct ElementField {
    int nx = 0;
    int ny = 0;
    std::vector<double> values;

    double min() const;
    double max() const;
    double operator()(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
};

/// Single-valued high-contrast field: background plus axis-aligned channels.
/// An element is a channel element when its center lies inside a rectangle.
struct ChannelFieldSpec {
    double background = 1.0;
    double channel = 1.0;
    std::vector<Rect> channels;
    int nx = 0;
    int ny = 0;
};

ElementField channelized_field(const ChannelFieldSpec& spec);

/// Shared channel geometry with per-continuum values.
struct ChannelLayout {
    std::array<double, 2> background{10.0, 1.0};
    std::array<double, 2> channel{1e5, 10.0};
    std::vector<Rect> channels;

    ChannelFieldSpec spec(int continuum, int nx, int ny) const;
};

/// Shipped layout: long thin horizontal and vertical strips, 2 to 4 fine
/// elements wide on a 128 x 128 grid.
ChannelLayout default_channel_layout();

/// Text format, one directive per line ('#' starts a comment):
///   background <a1> <a2>
///   channel <a1> <a2>
///   rect <x0> <y0> <x1> <y1>
ChannelLayout parse_channel_layout(std::istream& in);
ChannelLayout load_channel_layout(const std::string& path);

/// Fraction of elements whose value differs from `background`.
double channel_area_fraction(const ElementField& field, double background);

/// Raster text: header "nx ny", then nx*ny values row-major from the bottom row.
ElementField read_raster(std::istream& in);
ElementField load_raster(const std::string& path);
void write_raster(std::ostream& out, int nx, int ny, std::span<const double> values);

/// Coefficients of the reduced dual-continuum system
///   dp_i/dt - div(kappa_i grad p_i) + sum_j b_ij . grad p_j + c_i (p_i - p_j) = f_i.
///
/// kappa_i = a_i(x) / (1 + |p_i|) when pressure_dependent, else a_i(x).
/// b_i1 = s (p1, p1), b_i2 = s (-p2, -p2) with s = convection_scale.
/// c_i = transfer / (1 + |p_i|) when transfer_pressure_dependent, else transfer.
struct CoefficientModel {
    std::array<ElementField, 2> permeability;
    bool pressure_dependent = true;
    double convection_scale = 30.0;
    double transfer = 1e5;
    bool transfer_pressure_dependent = true;
    std::array<double, 2> source{1.0, 1.0};
};

/// The high-contrast benchmark on an nx x ny grid.
CoefficientModel test_problem(int nx, int ny, const ChannelLayout& layout = default_channel_layout());
/// Uses explicit permeability rasters instead of a layout.
CoefficientModel test_problem(ElementField a1, ElementField a2);

double conductivity(const CoefficientModel& m, double a, double p);
double transfer_coefficient(const CoefficientModel& m, double p);
/// Component value of b_ij (both components are equal).
double convection_component(const CoefficientModel& m, int j, double p1, double p2);

/// Coefficients sampled at quadrature points with the pressure frozen.
struct FrozenCoefficients {
    std::array<QuadField, 2> kappa;
    std::array<std::array<QuadField, 2>, 2> bx;  ///< [i][j]
    std::array<std::array<QuadField, 2>, 2> by;
    std::array<QuadField, 2> c;
    std::array<QuadField, 2> f;
};

FrozenCoefficients eval_coefficients(const CoefficientModel& model, const StructuredGrid& grid, const Vector& p1,
                                     const Vector& p2, int order = 2);

// ---------------------------------------------------------------------------
// cell-scale two-scale coefficients

/// k_j(y, p) and Q_j(y, p1, p2) on the unit cell Y = [0,1]^2, for pressures in [a, b].
/// Continuum indices are 0-based.
struct CellModel {
    std::function<double(int j, Point y, double p)> k;
    std::function<double(int j, Point y, double p1, double p2)> q;
    /// dQ_j/dp_r; central differences are used when empty.
    std::function<double(int j, int r, Point y, double p1, double p2)> dq;
    double a = 0.0;
    double b = 1.0;
    /// When set, Q_j = zeta * k_2(y, p2) for both continua and `q` is ignored.
    std::optional<double> shape_factor;

    double eval_q(int j, Point y, double p1, double p2) const;
    double eval_dq(int j, int r, Point y, double p1, double p2) const;
};

/// k_j = (2 + sin 2 pi y1) / (1 + p), Q_j = (1 + p1 p2) cos(2 pi y1), p in [0, 1].
CellModel separable_cell_model();
/// A coefficient whose cell solutions depend on p in a Lipschitz way:
/// k_j = 3 + sin 2 pi y1 + p cos 2 pi (y1 + y2), Q_j = (1 + p1 p2) cos(2 pi y1) sin(2 pi y2).
CellModel lipschitz_cell_model();

}  // namespace dcflow
