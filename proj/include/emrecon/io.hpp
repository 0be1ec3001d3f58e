#ifndef EMRECON_IO_HPP
#define EMRECON_IO_HPP

#include <map>
#include <string>

#include "emrecon/common.hpp"
#include "emrecon/mesh.hpp"

namespace emrecon::io {

// Nodal data attached to a VTK output; scalars are N x 1, vectors N x dim.
using PointData = std::map<std::string, MatrixXd>;

// Legacy ASCII UNSTRUCTURED_GRID writer for the FEM mesh.
void write_vtk_unstructured(const std::string& path, const mesh::SimplicialMesh& m,
                            const PointData& point_data = {});

// Legacy ASCII STRUCTURED_POINTS writer for the FD grid.
void write_vtk_structured_points(const std::string& path, const mesh::StructuredGrid& g,
                                 const PointData& point_data = {});

// All floating-point output is printed with 17 significant digits.
std::string format_double(double v);

}  // namespace emrecon::io

#endif  // EMRECON_IO_HPP
