//! Mesh readers: Gmsh MSH 2.2 ASCII subset and the native format.
//!
//! Native format (whitespace separated, `#` comments):
//! ```text
//! mhdmesh 1
//! vertices <n>
//! x y z            (n lines)
//! tets <m>
//! v0 v1 v2 v3      (m lines, 0-based)
//! ```
//!
//! Gmsh subset: `$Nodes` and `$Elements` blocks of MSH 2.2; element type 4
//! (4-node tet) is read, type 2 (3-node triangle) is accepted and ignored —
//! boundary triangles and components are rebuilt from the tets.

use super::{Mesh, Point};
use crate::error::{Error, Result};
use std::path::Path;

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let head = text.trim_start();
    if head.starts_with("$MeshFormat") {
        parse_gmsh(&text)
    } else if head.starts_with("mhdmesh") {
        parse_native(&text)
    } else {
        Err(Error::Parse(format!(
            "{}: unrecognized mesh format (expected $MeshFormat or mhdmesh header)",
            path.display()
        )))
    }
}

fn parse_native(text: &str) -> Result<Mesh> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .peekable();
    let mut expect = |what: &str| -> Result<&str> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file, wanted {what}")))
    };
    if expect("header")? != "mhdmesh" {
        return Err(Error::Parse("missing mhdmesh header".into()));
    }
    let version: u32 = parse_num(expect("version")?)?;
    if version != 1 {
        return Err(Error::Parse(format!("unsupported mhdmesh version {version}")));
    }
    if expect("'vertices'")? != "vertices" {
        return Err(Error::Parse("expected 'vertices' section".into()));
    }
    let nv: usize = parse_num(expect("vertex count")?)?;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x: f64 = parse_num(expect("x")?)?;
        let y: f64 = parse_num(expect("y")?)?;
        let z: f64 = parse_num(expect("z")?)?;
        vertices.push([x, y, z]);
    }
    if expect("'tets'")? != "tets" {
        return Err(Error::Parse("expected 'tets' section".into()));
    }
    let nt: usize = parse_num(expect("tet count")?)?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let mut t = [0usize; 4];
        for v in &mut t {
            *v = parse_num(expect("tet vertex")?)?;
        }
        tets.push(t);
    }
    Mesh::from_cells(vertices, tets)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse number from '{s}'")))
}

fn parse_gmsh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines();
    let mut vertices: Vec<Point> = Vec::new();
    let mut id_map: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    while let Some(line) = lines.next() {
        match line.trim() {
            "$MeshFormat" => {
                let fmt = lines
                    .next()
                    .ok_or_else(|| Error::Parse("truncated $MeshFormat".into()))?;
                let ver = fmt.split_whitespace().next().unwrap_or("");
                if !ver.starts_with("2.") {
                    return Err(Error::Parse(format!(
                        "unsupported MSH version {ver}, need 2.x ASCII"
                    )));
                }
                // $EndMeshFormat
                lines.next();
            }
            "$Nodes" => {
                let n: usize = parse_num(
                    lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated $Nodes".into()))?
                        .trim(),
                )?;
                for _ in 0..n {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated node list".into()))?;
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(it.next().unwrap_or(""))?;
                    let x: f64 = parse_num(it.next().unwrap_or(""))?;
                    let y: f64 = parse_num(it.next().unwrap_or(""))?;
                    let z: f64 = parse_num(it.next().unwrap_or(""))?;
                    id_map.insert(id, vertices.len());
                    vertices.push([x, y, z]);
                }
            }
            "$Elements" => {
                let n: usize = parse_num(
                    lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated $Elements".into()))?
                        .trim(),
                )?;
                for _ in 0..n {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::Parse("truncated element list".into()))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(Error::Parse(format!("malformed element line '{l}'")));
                    }
                    let etype: usize = parse_num(f[1])?;
                    let ntags: usize = parse_num(f[2])?;
                    let nodes = &f[3 + ntags..];
                    match etype {
                        4 => {
                            if nodes.len() != 4 {
                                return Err(Error::Parse(format!(
                                    "tet element needs 4 nodes, got {}",
                                    nodes.len()
                                )));
                            }
                            let mut t = [0usize; 4];
                            for (i, s) in nodes.iter().enumerate() {
                                let gid: usize = parse_num(s)?;
                                t[i] = *id_map.get(&gid).ok_or_else(|| {
                                    Error::Parse(format!("element references missing node {gid}"))
                                })?;
                            }
                            tets.push(t);
                        }
                        2 => {} // boundary triangles are rebuilt from the tets
                        15 | 1 => {}
                        other => {
                            return Err(Error::Parse(format!(
                                "unsupported gmsh element type {other}"
                            )))
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || tets.is_empty() {
        return Err(Error::Parse("gmsh file holds no tetrahedra".into()));
    }
    Mesh::from_cells(vertices, tets)
}

/// Write the native format (used by tests and the CLI `--builtin ... --out`).
pub fn write_native(mesh: &Mesh, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "mhdmesh 1")?;
    writeln!(f, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(f, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    writeln!(f, "tets {}", mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(f, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn native_roundtrip() {
        let m = super::super::unit_cube(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.mhd");
        write_native(&m, &p).unwrap();
        let m2 = load_mesh(&p).unwrap();
        assert_eq!(m.vertices.len(), m2.vertices.len());
        assert_eq!(m.tets.len(), m2.tets.len());
        assert_eq!(m.boundary_tris.len(), m2.boundary_tris.len());
    }

    #[test]
    fn gmsh_single_tet() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tet.msh");
        let mut f = std::fs::File::create(&p).unwrap();
        write!(
            f,
            "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n\
             1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n\
             $Elements\n5\n\
             1 4 2 1 1 1 2 3 4\n\
             2 2 2 1 1 1 2 3\n\
             3 2 2 1 1 1 2 4\n\
             4 2 2 1 1 1 3 4\n\
             5 2 2 1 1 2 3 4\n$EndElements\n"
        )
        .unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.tets.len(), 1);
        assert_eq!(m.boundary_tris.len(), 4);
    }

    #[test]
    fn missing_vertex_reference() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mhd");
        let mut f = std::fs::File::create(&p).unwrap();
        write!(
            f,
            "mhdmesh 1\nvertices 3\n0 0 0\n1 0 0\n0 1 0\ntets 1\n0 1 2 9\n"
        )
        .unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::Parse(_))));
    }

    #[test]
    fn malformed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.mhd");
        std::fs::write(&p, "this is not a mesh").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::Parse(_))));
    }
}
