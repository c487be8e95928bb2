"""Legacy ASCII VTK output for tetrahedral meshes."""
import numpy as np

VTK_TETRA = 10


def _fmt(row):
    return " ".join("%.10g" % x for x in row)


def export_vtk(mesh, path, point_data=None, cell_data=None, edge_data=None, title="llgtps output"):
    """Write an unstructured grid with vector data.

    point_data: name -> (n_vertices, 3) nodal vectors
    cell_data:  name -> (n_tets, 3) elementwise vectors
    edge_data:  name -> (edge_space, coefficients); written as cell averages
    """
    point_data = dict(point_data or {})
    cell_data = dict(cell_data or {})
    for name, (space, coeffs) in (edge_data or {}).items():
        cell_data[name] = space.cell_average(coeffs)
    nv, nt = mesh.n_vertices, mesh.n_tets
    lines = ["# vtk DataFile Version 2.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             "POINTS %d double" % nv]
    lines += [_fmt(x) for x in mesh.vertices]
    lines.append("CELLS %d %d" % (nt, 5 * nt))
    lines += ["4 %d %d %d %d" % tuple(t) for t in mesh.tets]
    lines.append("CELL_TYPES %d" % nt)
    lines += [str(VTK_TETRA)] * nt
    if point_data:
        lines.append("POINT_DATA %d" % nv)
        for name, vals in point_data.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != (nv, 3):
                raise ValueError("point field %r must have shape (%d, 3)" % (name, nv))
            lines.append("VECTORS %s double" % name)
            lines += [_fmt(v) for v in vals]
    if cell_data:
        lines.append("CELL_DATA %d" % nt)
        for name, vals in cell_data.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != (nt, 3):
                raise ValueError("cell field %r must have shape (%d, 3)" % (name, nt))
            lines.append("VECTORS %s double" % name)
            lines += [_fmt(v) for v in vals]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
