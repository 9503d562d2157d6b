#include "dcflow/field_io.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcflow/errors.hpp"

namespace dcflow {

namespace {

void put(std::ostream& out, double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

double parse_double(const std::string& tok, const char* what)
{
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size())
        throw InvalidArgument(std::string(what) + ": bad value '" + tok + "'");
    return v;
}

ElementField read_structured_points(std::istream& in)
{
    std::string line;
    std::array<std::string, 4> head;
    for (std::string& h : head)
        if (!std::getline(in, h)) throw InvalidArgument("structured points: truncated header");
    if (head[2].rfind("ASCII", 0) != 0) throw InvalidArgument("structured points: only ASCII files are supported");
    line = head[3];
    if (line.rfind("DATASET STRUCTURED_POINTS", 0) != 0)
        throw InvalidArgument("structured points: expected 'DATASET STRUCTURED_POINTS', got '" + line + "'");
    ElementField f;
    long count = -1;
    std::string tok;
    while (in >> tok) {
        if (tok == "DIMENSIONS") {
            int nz = 0;
            if (!(in >> f.nx >> f.ny >> nz) || f.nx < 1 || f.ny < 1 || nz != 1)
                throw InvalidArgument("structured points: bad DIMENSIONS");
        } else if (tok == "ORIGIN" || tok == "SPACING") {
            double skip[3];
            if (!(in >> skip[0] >> skip[1] >> skip[2])) throw InvalidArgument("structured points: bad " + tok);
        } else if (tok == "POINT_DATA") {
            if (!(in >> count)) throw InvalidArgument("structured points: bad POINT_DATA");
        } else if (tok == "SCALARS") {
            std::getline(in, line);
        } else if (tok == "LOOKUP_TABLE") {
            in >> tok;
            break;
        } else {
            throw InvalidArgument("structured points: unexpected token '" + tok + "'");
        }
    }
    if (f.nx < 1 || count != static_cast<long>(f.nx) * f.ny)
        throw InvalidArgument("structured points: POINT_DATA does not match DIMENSIONS");
    f.values.resize(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        if (!(in >> tok)) throw InvalidArgument("structured points: expected " + std::to_string(count) + " values");
        f.values[static_cast<std::size_t>(k)] = parse_double(tok, "structured points");
    }
    if (in >> tok) throw InvalidArgument("structured points: trailing data");
    return f;
}

}  // namespace

std::string to_string(FieldFormat format)
{
    return format == FieldFormat::RasterText ? "raster" : "vtk";
}

FieldFormat parse_field_format(const std::string& s)
{
    if (s == "raster" || s == "raster-text" || s == "txt") return FieldFormat::RasterText;
    if (s == "vtk" || s == "legacy-structured-points") return FieldFormat::StructuredPoints;
    throw InvalidArgument("unknown field format '" + s + "' (expected raster or vtk)");
}

ElementField nodal_field(const StructuredGrid& grid, const Vector& nodal)
{
    if (nodal.size() != grid.num_nodes()) throw InvalidArgument("nodal_field: vector size does not match the grid");
    ElementField f;
    f.nx = grid.nx() + 1;
    f.ny = grid.ny() + 1;
    f.values.assign(nodal.data(), nodal.data() + nodal.size());
    return f;
}

void write_field(std::ostream& out, const ElementField& field, FieldFormat format, Point spacing, Point origin,
                 const std::string& name)
{
    if (field.values.size() != static_cast<std::size_t>(field.nx) * field.ny)
        throw InvalidArgument("write_field: size mismatch");
    if (format == FieldFormat::RasterText) {
        write_raster(out, field.nx, field.ny, field.values);
        return;
    }
    out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << field.nx << ' ' << field.ny << " 1\n";
    out << "ORIGIN ";
    put(out, origin.x);
    out << ' ';
    put(out, origin.y);
    out << " 0\nSPACING ";
    put(out, spacing.x);
    out << ' ';
    put(out, spacing.y);
    out << " 1\nPOINT_DATA " << field.values.size() << '\n';
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int j = 0; j < field.ny; ++j) {
        for (int i = 0; i < field.nx; ++i) {
            if (i) out << ' ';
            put(out, field(i, j));
        }
        out << '\n';
    }
}

void export_field(const ElementField& field, const std::string& path, FieldFormat format, Point spacing, Point origin,
                  const std::string& name)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_field(out, field, format, spacing, origin, name);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void export_nodal(const StructuredGrid& grid, const Vector& nodal, const std::string& path, FieldFormat format,
                  const std::string& name)
{
    export_field(nodal_field(grid, nodal), path, format, {grid.hx(), grid.hy()}, {grid.domain().x0, grid.domain().y0},
                 name);
}

ElementField read_field(std::istream& in)
{
    const int c = in.peek();
    if (c == '#') return read_structured_points(in);
    return read_raster(in);
}

ElementField import_field(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open field file '" + path + "'");
    return read_field(in);
}

}  // namespace dcflow
