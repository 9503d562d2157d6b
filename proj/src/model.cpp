#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "dcflow/errors.hpp"
#include "dcflow/model.hpp"

namespace dcflow {

double ElementField::min() const
{
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

double ElementField::max() const
{
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

ElementField channelized_field(const ChannelFieldSpec& spec)
{
    if (spec.nx < 1 || spec.ny < 1) throw InvalidArgument("channel field: grid size must be positive");
    if (!(spec.background > 0.0)) throw InvalidArgument("channel field: background must be positive");
    if (spec.channel < spec.background) throw InvalidArgument("channel field: channel value below background");
    for (const Rect& r : spec.channels) {
        if (!(r.x0 < r.x1) || !(r.y0 < r.y1) || r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > 1.0 || r.y1 > 1.0)
            throw InvalidArgument("channel field: rectangle [" + std::to_string(r.x0) + "," + std::to_string(r.x1) +
                                  "]x[" + std::to_string(r.y0) + "," + std::to_string(r.y1) +
                                  "] is empty or outside the unit square");
    }
    ElementField f{spec.nx, spec.ny, std::vector<double>(static_cast<std::size_t>(spec.nx) * spec.ny, spec.background)};
    for (int j = 0; j < spec.ny; ++j)
        for (int i = 0; i < spec.nx; ++i) {
            const double x = (i + 0.5) / spec.nx, y = (j + 0.5) / spec.ny;
            for (const Rect& r : spec.channels)
                if (x > r.x0 && x < r.x1 && y > r.y0 && y < r.y1) {
                    f.values[static_cast<std::size_t>(j) * spec.nx + i] = spec.channel;
                    break;
                }
        }
    return f;
}

ChannelFieldSpec ChannelLayout::spec(int continuum, int nx, int ny) const
{
    if (continuum < 0 || continuum > 1) throw InvalidArgument("continuum index must be 0 or 1");
    return {background[continuum], channel[continuum], channels, nx, ny};
}

ChannelLayout default_channel_layout()
{
    // Strips stay inside [8, 120] so that no channel enters the outer ring of
    // coarse elements at H = 1/16.
    constexpr double u = 1.0 / 128.0;
    ChannelLayout l;
    // horizontal strips
    l.channels.push_back({8 * u, 20 * u, 100 * u, 22 * u});
    l.channels.push_back({30 * u, 45 * u, 120 * u, 48 * u});
    l.channels.push_back({8 * u, 70 * u, 90 * u, 72 * u});
    l.channels.push_back({40 * u, 96 * u, 120 * u, 100 * u});
    l.channels.push_back({10 * u, 112 * u, 70 * u, 114 * u});
    // vertical strips
    l.channels.push_back({16 * u, 30 * u, 18 * u, 110 * u});
    l.channels.push_back({58 * u, 8 * u, 61 * u, 60 * u});
    l.channels.push_back({84 * u, 76 * u, 86 * u, 120 * u});
    l.channels.push_back({108 * u, 10 * u, 112 * u, 90 * u});
    return l;
}

namespace {

[[noreturn]] void parse_error(int line, const std::string& msg)
{
    throw InvalidArgument("channel layout line " + std::to_string(line) + ": " + msg);
}

}  // namespace

ChannelLayout parse_channel_layout(std::istream& in)
{
    ChannelLayout l;
    bool have_bg = false, have_ch = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "background" || key == "channel") {
            double v1, v2;
            if (!(ss >> v1 >> v2)) parse_error(lineno, "expected two values after '" + key + "'");
            (key == "background" ? l.background : l.channel) = {v1, v2};
            (key == "background" ? have_bg : have_ch) = true;
        } else if (key == "rect") {
            Rect r;
            if (!(ss >> r.x0 >> r.y0 >> r.x1 >> r.y1)) parse_error(lineno, "expected x0 y0 x1 y1");
            l.channels.push_back(r);
        } else {
            parse_error(lineno, "unknown directive '" + key + "'");
        }
        std::string extra;
        if (ss >> extra) parse_error(lineno, "trailing token '" + extra + "'");
    }
    if (!have_bg || !have_ch) throw InvalidArgument("channel layout needs both 'background' and 'channel' lines");
    return l;
}

ChannelLayout load_channel_layout(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open channel layout '" + path + "'");
    return parse_channel_layout(in);
}

double channel_area_fraction(const ElementField& field, double background)
{
    if (field.values.empty()) return 0.0;
    const auto n = std::count_if(field.values.begin(), field.values.end(), [&](double v) { return v != background; });
    return static_cast<double>(n) / static_cast<double>(field.values.size());
}

ElementField read_raster(std::istream& in)
{
    ElementField f;
    if (!(in >> f.nx >> f.ny) || f.nx < 1 || f.ny < 1) throw InvalidArgument("raster: bad or missing 'nx ny' header");
    const std::size_t n = static_cast<std::size_t>(f.nx) * f.ny;
    f.values.resize(n);
    std::string tok;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(in >> tok)) throw InvalidArgument("raster: expected " + std::to_string(n) + " values, got " + std::to_string(k));
        // strtod accepts the hexfloat and decimal forms written by write_raster
        char* end = nullptr;
        f.values[k] = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw InvalidArgument("raster: bad value '" + tok + "'");
    }
    if (in >> tok) throw InvalidArgument("raster: trailing data after " + std::to_string(n) + " values");
    return f;
}

ElementField load_raster(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open raster '" + path + "'");
    return read_raster(in);
}

void write_raster(std::ostream& out, int nx, int ny, std::span<const double> values)
{
    if (values.size() != static_cast<std::size_t>(nx) * ny) throw InvalidArgument("write_raster: size mismatch");
    out << nx << ' ' << ny << '\n';
    char buf[64];
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            // shortest round-trip representation
            auto res = std::to_chars(buf, buf + sizeof buf, values[static_cast<std::size_t>(j) * nx + i]);
            if (i) out << ' ';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

CoefficientModel test_problem(int nx, int ny, const ChannelLayout& layout)
{
    return test_problem(channelized_field(layout.spec(0, nx, ny)), channelized_field(layout.spec(1, nx, ny)));
}

CoefficientModel test_problem(ElementField a1, ElementField a2)
{
    if (a1.nx != a2.nx || a1.ny != a2.ny) throw InvalidArgument("permeability fields have different shapes");
    if (!(a1.min() > 0.0) || !(a2.min() > 0.0)) throw InvalidArgument("permeability must be positive");
    CoefficientModel m;
    m.permeability = {std::move(a1), std::move(a2)};
    return m;
}

double conductivity(const CoefficientModel& m, double a, double p)
{
    return m.pressure_dependent ? a / (1.0 + std::abs(p)) : a;
}

double transfer_coefficient(const CoefficientModel& m, double p)
{
    return m.transfer_pressure_dependent ? m.transfer / (1.0 + std::abs(p)) : m.transfer;
}

double convection_component(const CoefficientModel& m, int j, double p1, double p2)
{
    return j == 0 ? m.convection_scale * p1 : -m.convection_scale * p2;
}

FrozenCoefficients eval_coefficients(const CoefficientModel& model, const StructuredGrid& grid, const Vector& p1,
                                     const Vector& p2, int order)
{
    for (const auto& a : model.permeability)
        if (a.nx != grid.nx() || a.ny != grid.ny())
            throw InvalidArgument("eval_coefficients: permeability is " + std::to_string(a.nx) + "x" +
                                  std::to_string(a.ny) + ", grid is " + std::to_string(grid.nx()) + "x" +
                                  std::to_string(grid.ny()));
    if (!p1.allFinite() || !p2.allFinite()) throw InvalidArgument("eval_coefficients: pressure contains NaN or Inf");

    const std::array<QuadField, 2> p{QuadField::from_nodal(grid, p1, order), QuadField::from_nodal(grid, p2, order)};
    FrozenCoefficients fc;
    const int nq = order * order;
    for (int i = 0; i < 2; ++i) {
        fc.kappa[i] = QuadField(grid, order, 0.0);
        fc.c[i] = QuadField(grid, order, 0.0);
        fc.f[i] = QuadField(grid, order, model.source[i]);
        for (int e = 0; e < grid.num_elements(); ++e) {
            const double a = model.permeability[i].values[e];
            for (int q = 0; q < nq; ++q) {
                fc.kappa[i](e, q) = conductivity(model, a, p[i](e, q));
                fc.c[i](e, q) = transfer_coefficient(model, p[i](e, q));
            }
        }
    }
    for (int j = 0; j < 2; ++j) {
        QuadField bj(grid, order, 0.0);
        for (int e = 0; e < grid.num_elements(); ++e)
            for (int q = 0; q < nq; ++q) bj(e, q) = convection_component(model, j, p[0](e, q), p[1](e, q));
        for (int i = 0; i < 2; ++i) {
            fc.bx[i][j] = bj;
            fc.by[i][j] = bj;
        }
    }
    return fc;
}

// ---------------------------------------------------------------------------

double CellModel::eval_q(int j, Point y, double p1, double p2) const
{
    if (shape_factor) return *shape_factor * k(1, y, p2);
    return q(j, y, p1, p2);
}

double CellModel::eval_dq(int j, int r, Point y, double p1, double p2) const
{
    if (dq && !shape_factor) return dq(j, r, y, p1, p2);
    const double h = 1e-6 * (b - a);
    if (r == 0) return (eval_q(j, y, p1 + h, p2) - eval_q(j, y, p1 - h, p2)) / (2 * h);
    return (eval_q(j, y, p1, p2 + h) - eval_q(j, y, p1, p2 - h)) / (2 * h);
}

CellModel separable_cell_model()
{
    constexpr double tp = 2.0 * std::numbers::pi;
    CellModel m;
    m.k = [](int, Point y, double p) { return (2.0 + std::sin(tp * y.x)) / (1.0 + p); };
    m.q = [](int, Point y, double p1, double p2) { return (1.0 + p1 * p2) * std::cos(tp * y.x); };
    m.dq = [](int, int r, Point y, double p1, double p2) { return (r == 0 ? p2 : p1) * std::cos(tp * y.x); };
    return m;
}

CellModel lipschitz_cell_model()
{
    constexpr double tp = 2.0 * std::numbers::pi;
    CellModel m;
    m.k = [](int, Point y, double p) { return 3.0 + std::sin(tp * y.x) + p * std::cos(tp * (y.x + y.y)); };
    m.q = [](int, Point y, double p1, double p2) {
        return (1.0 + p1 * p2) * std::cos(tp * y.x) * std::sin(tp * y.y);
    };
    m.dq = [](int, int r, Point y, double p1, double p2) {
        return (r == 0 ? p2 : p1) * std::cos(tp * y.x) * std::sin(tp * y.y);
    };
    return m;
}

}  // namespace dcflow
