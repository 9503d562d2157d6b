#pragma once

#include <iosfwd>
#include <string>

#include "dcflow/fem.hpp"
#include "dcflow/grid.hpp"
#include "dcflow/model.hpp"

namespace dcflow {

enum class FieldFormat {
    RasterText,        ///< the model module's raster format
    StructuredPoints,  ///< ASCII legacy VTK structured points
};

std::string to_string(FieldFormat format);
FieldFormat parse_field_format(const std::string& s);

/// Nodal values of `grid` as an (nx+1) x (ny+1) raster.
ElementField nodal_field(const StructuredGrid& grid, const Vector& nodal);

/// Values are written with the shortest round-trip representation, so an
/// export followed by import reproduces every bit. `spacing` and `origin`
/// only affect the structured-points header.
void write_field(std::ostream& out, const ElementField& field, FieldFormat format, Point spacing = {1.0, 1.0},
                 Point origin = {0.0, 0.0}, const std::string& name = "field");
void export_field(const ElementField& field, const std::string& path, FieldFormat format,
                  Point spacing = {1.0, 1.0}, Point origin = {0.0, 0.0}, const std::string& name = "field");
void export_nodal(const StructuredGrid& grid, const Vector& nodal, const std::string& path, FieldFormat format,
                  const std::string& name = "field");

/// Reads either format; structured points are recognized by their "# vtk" header.
ElementField read_field(std::istream& in);
ElementField import_field(const std::string& path);

}  // namespace dcflow
