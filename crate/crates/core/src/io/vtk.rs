//! Legacy ASCII VTK unstructured-grid output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::fem::{FemError, Field};
use crate::filtering::IndicatorSamples;
use crate::mesh::TriMesh;
use crate::stepper::SimState;

use super::IoError;

/// Point and cell arrays attached to a mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

fn check_len(name: &str, got: usize, expected: usize) -> Result<(), IoError> {
    if got != expected {
        return Err(IoError::Invalid(format!("array `{name}` has {got} entries, expected {expected}")));
    }
    Ok(())
}

fn num(out: &mut String, v: f64) {
    // 17 significant digits
    let _ = write!(out, "{v:.16e}");
}

pub fn render_vtk(mesh: &TriMesh, data: &VtkData, title: &str) -> Result<String, IoError> {
    let (np, nc) = (mesh.num_vertices(), mesh.num_triangles());
    for (n, v) in &data.point_scalars {
        check_len(n, v.len(), np)?;
    }
    for (n, v) in &data.point_vectors {
        check_len(n, v.len(), np)?;
    }
    for (n, v) in &data.cell_scalars {
        check_len(n, v.len(), nc)?;
    }
    let mut out = String::with_capacity(64 * (np + nc));
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title.lines().next().unwrap_or(""));
    out.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {np} double");
    for p in mesh.vertices() {
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push_str(" 0\n");
    }
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    if !data.point_scalars.is_empty() || !data.point_vectors.is_empty() {
        let _ = writeln!(out, "POINT_DATA {np}");
        for (name, v) in &data.point_scalars {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for &x in v {
                num(&mut out, x);
                out.push('\n');
            }
        }
        for (name, v) in &data.point_vectors {
            let _ = writeln!(out, "VECTORS {name} double");
            for x in v {
                num(&mut out, x[0]);
                out.push(' ');
                num(&mut out, x[1]);
                out.push_str(" 0\n");
            }
        }
    }
    if !data.cell_scalars.is_empty() {
        let _ = writeln!(out, "CELL_DATA {nc}");
        for (name, v) in &data.cell_scalars {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for &x in v {
                num(&mut out, x);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_vtk(path: &Path, mesh: &TriMesh, data: &VtkData, title: &str) -> Result<(), IoError> {
    let text = render_vtk(mesh, data, title)?;
    fs::write(path, text).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Values of a field at arbitrary points, one `Vec` per component.
fn sample(field: &Field, points: &[[f64; 2]]) -> Result<Vec<Vec<f64>>, FemError> {
    let flat = field.evaluate(points)?;
    let c = field.components();
    Ok((0..c).map(|k| flat.iter().skip(k).step_by(c).copied().collect()).collect())
}

/// Velocity, temperature and pressure of a state on the computational mesh,
/// or on its uniform refinement when `refine` is set. The indicator, when
/// given, is written as per-cell means.
pub fn snapshot_data(
    state: &SimState,
    indicator: Option<&IndicatorSamples>,
    refine: bool,
) -> Result<(TriMesh, VtkData), IoError> {
    let mesh = state.u_curr.space().mesh();
    let vis = if refine { mesh.refine_uniform() } else { (**mesh).clone() };
    let pts = vis.vertices();
    let u = sample(&state.u_curr, pts)?;
    let temp = sample(&state.temp_curr, pts)?.remove(0);
    let p = sample(&state.p_curr, pts)?.remove(0);
    let mut data = VtkData {
        point_scalars: vec![("T".into(), temp), ("p".into(), p)],
        point_vectors: vec![("u".into(), u[0].iter().zip(&u[1]).map(|(&a, &b)| [a, b]).collect())],
        cell_scalars: Vec::new(),
    };
    if let Some(a) = indicator {
        let means = a.samples.cell_means();
        let per_cell = if refine { means.iter().flat_map(|&m| [m; 4]).collect() } else { means };
        data.cell_scalars.push(("indicator".into(), per_cell));
    }
    Ok((vis, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangles_with_zero_fields() {
        let mesh = TriMesh::rect((1.0, 2.0), (1.0, 2.0), 1, 1).unwrap();
        let data = VtkData {
            point_scalars: vec![("T".into(), vec![0.0; 4])],
            point_vectors: vec![("u".into(), vec![[0.0; 2]; 4])],
            cell_scalars: vec![("indicator".into(), vec![0.0; 2])],
        };
        let text = render_vtk(&mesh, &data, "zero").unwrap();
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("CELL_DATA 2"));
        let zeros = text.lines().filter(|l| l.split(' ').all(|t| t.parse::<f64>() == Ok(0.0))).count();
        // 4 scalars + 4 vectors + 2 cell values
        assert_eq!(zeros, 10);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let mesh = TriMesh::rect((0.0, 1.0), (0.0, 1.0), 1, 1).unwrap();
        let data = VtkData { cell_scalars: vec![("a".into(), vec![0.0; 3])], ..Default::default() };
        assert!(render_vtk(&mesh, &data, "x").is_err());
    }

    #[test]
    fn coordinates_survive_text_round_trip() {
        let mesh = TriMesh::rect((0.1, 0.7), (-0.3, 1.0 / 3.0), 3, 2).unwrap();
        let text = render_vtk(&mesh, &VtkData::default(), "coords").unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("POINTS")).unwrap() + 1;
        for (i, p) in mesh.vertices().iter().enumerate() {
            let xs: Vec<f64> = lines[start + i].split(' ').map(|t| t.parse().unwrap()).collect();
            assert_eq!(xs[0], p[0]);
            assert_eq!(xs[1], p[1]);
        }
    }
}
