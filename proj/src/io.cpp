#include "emrecon/io.hpp"

#include <cstdio>
#include <fstream>

namespace emrecon::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_point_data(std::ofstream& out, const PointData& point_data, int npoints, int dim) {
  if (point_data.empty()) return;
  out << "POINT_DATA " << npoints << "\n";
  for (const auto& [name, data] : point_data) {
    if (data.rows() != npoints)
      throw ConfigError("vtk writer: point data '" + name + "' has wrong row count");
    if (data.cols() == 1) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < npoints; ++i) out << format_double(data(i, 0)) << "\n";
    } else {
      out << "VECTORS " << name << " double\n";
      for (int i = 0; i < npoints; ++i) {
        for (int a = 0; a < 3; ++a)
          out << (a < data.cols() ? format_double(data(i, a)) : "0") << (a < 2 ? " " : "\n");
      }
    }
  }
  (void)dim;
}

}  // namespace

void write_vtk_unstructured(const std::string& path, const mesh::SimplicialMesh& m,
                            const PointData& point_data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("vtk writer: cannot write " + path);
  out << "# vtk DataFile Version 2.0\nemrecon fem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.num_nodes() << " double\n";
  for (int n = 0; n < m.num_nodes(); ++n) {
    for (int a = 0; a < 3; ++a)
      out << (a < m.dim ? format_double(m.nodes(n, a)) : "0") << (a < 2 ? " " : "\n");
  }
  const int nv = m.dim + 1;
  out << "CELLS " << m.num_elements() << " " << m.num_elements() * (nv + 1) << "\n";
  for (int e = 0; e < m.num_elements(); ++e) {
    out << nv;
    for (int k = 0; k < nv; ++k) out << " " << m.elements(e, k);
    out << "\n";
  }
  out << "CELL_TYPES " << m.num_elements() << "\n";
  const int cell_type = m.dim == 2 ? 5 : 10;  // VTK_TRIANGLE / VTK_TETRA
  for (int e = 0; e < m.num_elements(); ++e) out << cell_type << "\n";
  write_point_data(out, point_data, m.num_nodes(), m.dim);
}

void write_vtk_structured_points(const std::string& path, const mesh::StructuredGrid& g,
                                 const PointData& point_data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("vtk writer: cannot write " + path);
  out << "# vtk DataFile Version 2.0\nemrecon fd grid\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << g.extents[0] << " " << g.extents[1] << " " << g.extents[2] << "\n";
  out << "ORIGIN " << format_double(g.origin[0]) << " " << format_double(g.origin[1]) << " "
      << format_double(g.dim == 3 ? g.origin[2] : 0.0) << "\n";
  out << "SPACING " << format_double(g.spacing) << " " << format_double(g.spacing) << " "
      << format_double(g.spacing) << "\n";
  write_point_data(out, point_data, g.num_nodes(), g.dim);
}

}  // namespace emrecon::io
