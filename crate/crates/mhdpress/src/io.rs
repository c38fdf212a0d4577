//! Field export (VTK legacy ASCII), CSV tables and JSON reports.

use crate::error::{Error, Result};
use crate::fem::field::Field;
use crate::fem::space::Kind;
use crate::mesh::Mesh;
use std::io::Write;
use std::path::Path;

/// Write a field as VTK legacy ASCII (unstructured grid, point data at the
/// mesh vertices; P2 fields are sampled at the vertex nodes).
pub fn write_vtk(field: &Field, name: &str, path: &Path) -> Result<()> {
    let mesh = &field.space.mesh;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "{name}")?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(f, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(f, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    writeln!(f, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(f, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(f, "CELL_TYPES {}", mesh.tets.len())?;
    for _ in &mesh.tets {
        writeln!(f, "10")?;
    }
    writeln!(f, "POINT_DATA {}", mesh.vertices.len())?;
    match field.space.kind {
        Kind::Scalar => {
            writeln!(f, "SCALARS {name} double 1")?;
            writeln!(f, "LOOKUP_TABLE default")?;
            for n in 0..mesh.vertices.len() {
                writeln!(f, "{:.17e}", field.full[n])?;
            }
        }
        Kind::Vector => {
            writeln!(f, "VECTORS {name} double")?;
            for n in 0..mesh.vertices.len() {
                writeln!(
                    f,
                    "{:.17e} {:.17e} {:.17e}",
                    field.full[3 * n],
                    field.full[3 * n + 1],
                    field.full[3 * n + 2]
                )?;
            }
        }
    }
    Ok(())
}

/// Read back the point data of a legacy VTK file written by [`write_vtk`]
/// (round-trip fidelity checks).
pub fn read_vtk_point_data(path: &Path) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().peekable();
    let mut points = Vec::new();
    let mut data = Vec::new();
    while let Some(line) = lines.next() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("POINTS") => {
                let n: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse("bad POINTS header".into()))?;
                for _ in 0..n {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated POINTS".into()))?;
                    let v: Vec<f64> = l
                        .split_whitespace()
                        .map(|s| s.parse().unwrap_or(f64::NAN))
                        .collect();
                    points.push([v[0], v[1], v[2]]);
                }
            }
            Some("SCALARS") => {
                lines.next(); // LOOKUP_TABLE
                for _ in 0..points.len() {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated SCALARS".into()))?;
                    data.push(l.trim().parse().unwrap_or(f64::NAN));
                }
            }
            Some("VECTORS") => {
                for _ in 0..points.len() {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated VECTORS".into()))?;
                    for s in l.split_whitespace() {
                        data.push(s.parse().unwrap_or(f64::NAN));
                    }
                }
            }
            _ => {}
        }
    }
    Ok((points, data))
}

/// RFC 4180 CSV: numeric cells never need quoting; headers are plain.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Flux matrix CSV: one row per kernel field, one column per component.
pub fn write_flux_matrix_csv(
    basis: &crate::kernel::HarmonicBasis,
    path: &Path,
) -> Result<()> {
    let i = basis.dim();
    let mut header: Vec<String> = vec!["field".into()];
    for k in 1..=i {
        header.push(format!("variational_gamma{k}"));
    }
    for k in 0..=i {
        header.push(format!("surface_gamma{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::new();
    for j in 0..i {
        let mut row = vec![format!("grad_q{}", j + 1)];
        for k in 0..i {
            row.push(format!("{:.12e}", basis.flux_matrix[j][k]));
        }
        for k in 0..=i {
            row.push(format!("{:.12e}", basis.flux_matrix_surface[j][k]));
        }
        rows.push(row);
    }
    write_csv(path, &header_refs, &rows)
}

/// Rate-table CSV: level, h, dofs, then error and ratio columns per norm.
pub fn write_rate_csv(table: &crate::verify::RateTable, path: &Path) -> Result<()> {
    let norms: Vec<String> = table
        .rows
        .iter()
        .flat_map(|r| r.errors.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header: Vec<String> = vec!["level".into(), "h".into(), "dofs".into()];
    for n in &norms {
        header.push(format!("err_{n}"));
    }
    for n in &norms {
        header.push(format!("ratio_{n}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::new();
    for (i, r) in table.rows.iter().enumerate() {
        let mut row = vec![
            r.level.to_string(),
            format!("{:.6e}", r.h),
            r.dofs.to_string(),
        ];
        for n in &norms {
            row.push(
                r.errors
                    .get(n)
                    .map(|e| format!("{e:.6e}"))
                    .unwrap_or_else(|| "failed".into()),
            );
        }
        for n in &norms {
            let ratio = if i == 0 {
                None
            } else {
                table.ratios.get(n).and_then(|v| v.get(i - 1))
            };
            row.push(
                ratio
                    .map(|x| format!("{x:.4}"))
                    .unwrap_or_else(|| String::new()),
            );
        }
        rows.push(row);
    }
    write_csv(path, &header_refs, &rows)
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)
        .map_err(|e| Error::Config(format!("json write failed: {e}")))?;
    Ok(())
}

/// Write the mesh wireframe as VTK (no data) for inspection.
pub fn write_mesh_vtk(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "mesh")?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(f, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(f, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    writeln!(f, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(f, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(f, "CELL_TYPES {}", mesh.tets.len())?;
    for _ in &mesh.tets {
        writeln!(f, "10")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::{build_space, BcSpec};
    use crate::mesh::unit_cube;
    use std::sync::Arc;

    #[test]
    fn vtk_roundtrip_p1_vertex_values() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        let u = Field::interpolate_vector(&sp, |p| [p[0] * p[1], -p[2], 0.25 + p[1]]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.vtk");
        write_vtk(&u, "u", &path).unwrap();
        let (points, data) = read_vtk_point_data(&path).unwrap();
        assert_eq!(points.len(), mesh.vertices.len());
        assert_eq!(data.len(), 3 * mesh.vertices.len());
        for (a, b) in data.iter().zip(&u.full) {
            assert!((a - b).abs() < 1e-12, "roundtrip {a} vs {b}");
        }
    }

    #[test]
    fn csv_is_plain_rfc4180() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(
            &path,
            &["a", "b"],
            &[vec!["1".into(), "2".into()], vec!["3".into(), "4".into()]],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,2\n3,4\n");
    }
}
