//! Tetrahedral meshes with labeled boundary components.

pub mod io;

use crate::error::{Error, Result};
use std::collections::HashMap;

pub type Point = [f64; 3];

#[derive(Debug, Clone)]
pub struct BoundaryTri {
    /// Vertex indices, ordered so the outward normal is
    /// `(v1-v0) x (v2-v0)` normalized.
    pub verts: [usize; 3],
    /// Owning tet.
    pub tet: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Positively oriented tets.
    pub tets: Vec<[usize; 4]>,
    pub boundary_tris: Vec<BoundaryTri>,
    /// Component id per boundary triangle; component 0 is the outer boundary.
    pub component_of_tri: Vec<usize>,
    /// Number of boundary components, I + 1.
    pub n_components: usize,
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn signed_volume(p: &[Point; 4]) -> f64 {
    dot(sub(p[1], p[0]), cross(sub(p[2], p[0]), sub(p[3], p[0]))) / 6.0
}

impl Mesh {
    /// Build a mesh from raw vertices and tets: orient tets positively,
    /// extract the boundary as faces appearing in exactly one tet, orient
    /// boundary normals outward and classify the components.
    pub fn from_cells(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Mesh> {
        if vertices.len() < 4 || tets.is_empty() {
            return Err(Error::Parse(format!(
                "mesh needs at least 4 vertices and 1 tet, got {} / {}",
                vertices.len(),
                tets.len()
            )));
        }
        for (i, t) in tets.iter().enumerate() {
            for &v in t {
                if v >= vertices.len() {
                    return Err(Error::Parse(format!(
                        "tet {i} references missing vertex {v} (have {})",
                        vertices.len()
                    )));
                }
            }
        }
        let scale3 = {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for v in &vertices {
                for d in 0..3 {
                    lo[d] = lo[d].min(v[d]);
                    hi[d] = hi[d].max(v[d]);
                }
            }
            let diam = (0..3).map(|d| hi[d] - lo[d]).fold(0.0f64, f64::max);
            diam * diam * diam
        };
        for (i, t) in tets.iter_mut().enumerate() {
            let pts = [
                vertices[t[0]],
                vertices[t[1]],
                vertices[t[2]],
                vertices[t[3]],
            ];
            let vol = signed_volume(&pts);
            if vol < 0.0 {
                t.swap(2, 3);
            }
            if vol.abs() <= 1e-14 * scale3.max(1e-300) {
                return Err(Error::DegenerateElement(format!(
                    "tet {i} has volume {vol:.3e}"
                )));
            }
        }
        // Local faces of a positively oriented tet, ordered so the face
        // normal points out of the tet.
        const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
        let mut face_count: HashMap<[usize; 3], (usize, [usize; 3], usize)> = HashMap::new();
        for (ti, t) in tets.iter().enumerate() {
            for f in FACES {
                let tri = [t[f[0]], t[f[1]], t[f[2]]];
                let mut key = tri;
                key.sort_unstable();
                let e = face_count.entry(key).or_insert((0, tri, ti));
                e.0 += 1;
                if e.0 > 2 {
                    return Err(Error::NonManifoldBoundary(format!(
                        "face {key:?} shared by more than 2 tets"
                    )));
                }
            }
        }
        let mut boundary_tris: Vec<BoundaryTri> = face_count
            .into_values()
            .filter(|(c, _, _)| *c == 1)
            .map(|(_, verts, tet)| BoundaryTri { verts, tet })
            .collect();
        boundary_tris.sort_by_key(|t| t.verts);
        let mut mesh = Mesh {
            vertices,
            tets,
            boundary_tris,
            component_of_tri: Vec::new(),
            n_components: 0,
        };
        classify_boundary(&mut mesh)?;
        Ok(mesh)
    }

    pub fn n_internal_components(&self) -> usize {
        self.n_components - 1
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        let v = self.tets[t];
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
            self.vertices[v[3]],
        ]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    /// Largest edge length of tet `t`.
    pub fn tet_diameter(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        let mut h: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                h = h.max(norm(sub(p[i], p[j])));
            }
        }
        h
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.tets.len())
            .map(|t| self.tet_diameter(t))
            .fold(0.0, f64::max)
    }

    /// Outward unit normal and area of boundary triangle `bt`.
    pub fn tri_normal_area(&self, bt: usize) -> (Point, f64) {
        let t = &self.boundary_tris[bt];
        let p0 = self.vertices[t.verts[0]];
        let p1 = self.vertices[t.verts[1]];
        let p2 = self.vertices[t.verts[2]];
        let n = cross(sub(p1, p0), sub(p2, p0));
        let len = norm(n);
        (scale(n, 1.0 / len), 0.5 * len)
    }

    /// Per boundary vertex, the clusters of adjacent boundary-face normals
    /// (angular tolerance 1e-6 rad). 1 cluster = face node, 2 = edge node,
    /// >= 3 = corner node. Interior vertices are absent from the map.
    pub fn nodal_normals(&self) -> HashMap<usize, Vec<Point>> {
        let mut map: HashMap<usize, Vec<Point>> = HashMap::new();
        for bt in 0..self.boundary_tris.len() {
            let (n, _) = self.tri_normal_area(bt);
            for &v in &self.boundary_tris[bt].verts {
                let clusters = map.entry(v).or_default();
                merge_normal(clusters, n);
            }
        }
        map
    }

    /// Total volume.
    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }
}

pub(crate) fn merge_normal(clusters: &mut Vec<Point>, n: Point) {
    const TOL: f64 = 1e-6; // radians
    for c in clusters.iter() {
        let cosang = dot(*c, n).clamp(-1.0, 1.0);
        if cosang.acos() < TOL {
            return;
        }
    }
    clusters.push(n);
}

/// Classify boundary triangles into connected components by edge-adjacency
/// flood fill and label the outer component 0 (the one whose axis-aligned
/// bounding box strictly contains all others).
pub fn classify_boundary(mesh: &mut Mesh) -> Result<()> {
    let nt = mesh.boundary_tris.len();
    let mut edge_to_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in mesh.boundary_tris.iter().enumerate() {
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let (x, y) = (t.verts[a].min(t.verts[b]), t.verts[a].max(t.verts[b]));
            edge_to_tris.entry((x, y)).or_default().push(i);
        }
    }
    let mut comp = vec![usize::MAX; nt];
    let mut n_comp = 0;
    for start in 0..nt {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = n_comp;
        while let Some(i) = stack.pop() {
            let t = &mesh.boundary_tris[i];
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                let (x, y) = (t.verts[a].min(t.verts[b]), t.verts[a].max(t.verts[b]));
                for &j in &edge_to_tris[&(x, y)] {
                    if comp[j] == usize::MAX {
                        comp[j] = n_comp;
                        stack.push(j);
                    }
                }
            }
        }
        n_comp += 1;
    }
    // bounding boxes per component
    let mut lo = vec![[f64::INFINITY; 3]; n_comp];
    let mut hi = vec![[f64::NEG_INFINITY; 3]; n_comp];
    for (i, t) in mesh.boundary_tris.iter().enumerate() {
        for &v in &t.verts {
            for d in 0..3 {
                lo[comp[i]][d] = lo[comp[i]][d].min(mesh.vertices[v][d]);
                hi[comp[i]][d] = hi[comp[i]][d].max(mesh.vertices[v][d]);
            }
        }
    }
    let mut outer = None;
    if n_comp == 1 {
        outer = Some(0);
    } else {
        'cand: for c in 0..n_comp {
            for o in 0..n_comp {
                if o == c {
                    continue;
                }
                for d in 0..3 {
                    if !(lo[c][d] < lo[o][d] && hi[c][d] > hi[o][d]) {
                        continue 'cand;
                    }
                }
            }
            outer = Some(c);
            break;
        }
    }
    let outer = outer.ok_or(Error::AmbiguousOuterComponent)?;
    // relabel: outer -> 0, others keep flood-fill order
    let mut relabel = vec![0usize; n_comp];
    let mut next = 1;
    for (c, r) in relabel.iter_mut().enumerate() {
        if c == outer {
            *r = 0;
        } else {
            *r = next;
            next += 1;
        }
    }
    mesh.component_of_tri = comp.iter().map(|&c| relabel[c]).collect();
    mesh.n_components = n_comp;
    Ok(())
}

/// Kuhn (Freudenthal) subdivision of an axis-aligned box grid into 6 tets
/// per cell; `keep` decides which cells belong to the mesh.
fn kuhn_grid(
    nx: usize,
    ny: usize,
    nz: usize,
    origin: Point,
    cell: [f64; 3],
    keep: impl Fn(usize, usize, usize) -> bool,
) -> (Vec<Point>, Vec<[usize; 4]>) {
    let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    origin[0] + i as f64 * cell[0],
                    origin[1] + j as f64 * cell[1],
                    origin[2] + k as f64 * cell[2],
                ]);
            }
        }
    }
    // 6 tets around the main diagonal c000 -> c111, one per permutation of
    // the axis steps; face-to-face consistent across cells.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !keep(i, j, k) {
                    continue;
                }
                for perm in PERMS {
                    let mut p = [i, j, k];
                    let mut quad = [vid(p[0], p[1], p[2]), 0, 0, 0];
                    for (s, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        quad[s + 1] = vid(p[0], p[1], p[2]);
                    }
                    tets.push(quad);
                }
            }
        }
    }
    // drop unused vertices
    let mut used = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for t in &mut tets {
        for v in t.iter_mut() {
            if used[*v] == usize::MAX {
                used[*v] = kept.len();
                kept.push(vertices[*v]);
            }
            *v = used[*v];
        }
    }
    (kept, tets)
}

/// Unit cube [0,1]^3, n x n x n cells, 6 tets each.
pub fn unit_cube(n: usize) -> Result<Mesh> {
    let (v, t) = kuhn_grid(
        n,
        n,
        n,
        [0.0; 3],
        [1.0 / n as f64; 3],
        |_, _, _| true,
    );
    Mesh::from_cells(v, t)
}

/// Hollow box: shell of thickness `n` cells around a centered cavity of
/// `m x m x m` cells; grid (2n+m)^3 on [0,1]^3. One internal component.
pub fn hollow_box(n: usize, m: usize) -> Result<Mesh> {
    if n == 0 || m == 0 {
        return Err(Error::Config("hollow-box needs n,m >= 1".into()));
    }
    let total = 2 * n + m;
    let (v, t) = kuhn_grid(
        total,
        total,
        total,
        [0.0; 3],
        [1.0 / total as f64; 3],
        |i, j, k| {
            !(i >= n && i < n + m && j >= n && j < n + m && k >= n && k < n + m)
        },
    );
    Mesh::from_cells(v, t)
}

/// Box with two separated cavities (I = 2): x extent 3n+2m cells, y/z
/// extent 2n+m cells; cavities of m^3 cells at x offsets n and 2n+m.
pub fn two_cavity_box(n: usize, m: usize) -> Result<Mesh> {
    if n == 0 || m == 0 {
        return Err(Error::Config("two-cavity needs n,m >= 1".into()));
    }
    let nx = 3 * n + 2 * m;
    let nyz = 2 * n + m;
    let h = 1.0 / nyz as f64;
    let (v, t) = kuhn_grid(nx, nyz, nyz, [0.0; 3], [h; 3], |i, j, k| {
        let in_yz = j >= n && j < n + m && k >= n && k < n + m;
        let in_c1 = i >= n && i < n + m;
        let in_c2 = i >= 2 * n + m && i < 2 * n + 2 * m;
        !(in_yz && (in_c1 || in_c2))
    });
    Mesh::from_cells(v, t)
}

/// Polyhedral approximation of the spherical shell r_in <= |x| <= r_out:
/// a hollow-box shell mapped radially so that inf-norm levels become
/// 2-norm spheres. Centered at the origin.
pub fn spherical_shell(n: usize, m: usize, r_in: f64, r_out: f64) -> Result<Mesh> {
    let total = 2 * n + m;
    let center = 0.5;
    let t_in = m as f64 / (2.0 * total as f64);
    let t_out = 0.5;
    let (v, t) = kuhn_grid(
        total,
        total,
        total,
        [0.0; 3],
        [1.0 / total as f64; 3],
        |i, j, k| {
            !(i >= n && i < n + m && j >= n && j < n + m && k >= n && k < n + m)
        },
    );
    let v = v
        .into_iter()
        .map(|p| {
            let d = [p[0] - center, p[1] - center, p[2] - center];
            let tinf = d[0].abs().max(d[1].abs()).max(d[2].abs());
            let r = r_in + (tinf - t_in) / (t_out - t_in) * (r_out - r_in);
            let len = norm(d);
            scale(d, r / len)
        })
        .collect();
    Mesh::from_cells(v, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tet() {
        let m = Mesh::from_cells(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.tets.len(), 1);
        assert_eq!(m.boundary_tris.len(), 4);
        assert_eq!(m.n_components, 1);
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cube_2_counts() {
        // structured unit cube, 2x2x2 subdivision, 6 tets per subcube
        let m = unit_cube(2).unwrap();
        assert_eq!(m.vertices.len(), 27);
        assert_eq!(m.tets.len(), 48);
        assert_eq!(m.boundary_tris.len(), 48);
        assert_eq!(m.n_components, 1);
        assert!((m.volume() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn missing_vertex_is_parse_error() {
        let r = Mesh::from_cells(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2, 7]],
        );
        assert!(matches!(r, Err(Error::Parse(_))));
    }

    #[test]
    fn hollow_box_components() {
        let m = hollow_box(1, 1).unwrap();
        assert_eq!(m.n_components, 2);
        // outer component points must reach the hull
        let outer_tris: Vec<_> = (0..m.boundary_tris.len())
            .filter(|&i| m.component_of_tri[i] == 0)
            .collect();
        let mut hi = f64::NEG_INFINITY;
        for &i in &outer_tris {
            for &v in &m.boundary_tris[i].verts {
                hi = hi.max(m.vertices[v][0]);
            }
        }
        assert!((hi - 1.0).abs() < 1e-14, "outer must be labeled 0");
    }

    #[test]
    fn two_cavity_components() {
        let m = two_cavity_box(1, 1).unwrap();
        assert_eq!(m.n_components, 3);
    }

    #[test]
    fn outward_normals_and_divergence_theorem() {
        // For each component the area-weighted normal sums to zero, and
        // normals point away from the owning tet.
        let m = hollow_box(1, 1).unwrap();
        let mut sums = vec![[0.0f64; 3]; m.n_components];
        let mut areas = vec![0.0f64; m.n_components];
        for bt in 0..m.boundary_tris.len() {
            let (nrm, area) = m.tri_normal_area(bt);
            let c = m.component_of_tri[bt];
            for d in 0..3 {
                sums[c][d] += nrm[d] * area;
            }
            areas[c] += area;
            // outward: centroid of face minus opposite tet centroid along n >= 0
            let tet = m.boundary_tris[bt].tet;
            let tp = m.tet_points(tet);
            let tc = [
                (tp[0][0] + tp[1][0] + tp[2][0] + tp[3][0]) / 4.0,
                (tp[0][1] + tp[1][1] + tp[2][1] + tp[3][1]) / 4.0,
                (tp[0][2] + tp[1][2] + tp[2][2] + tp[3][2]) / 4.0,
            ];
            let t = &m.boundary_tris[bt];
            let fc = [
                (m.vertices[t.verts[0]][0] + m.vertices[t.verts[1]][0] + m.vertices[t.verts[2]][0])
                    / 3.0,
                (m.vertices[t.verts[0]][1] + m.vertices[t.verts[1]][1] + m.vertices[t.verts[2]][1])
                    / 3.0,
                (m.vertices[t.verts[0]][2] + m.vertices[t.verts[1]][2] + m.vertices[t.verts[2]][2])
                    / 3.0,
            ];
            assert!(dot(nrm, sub(fc, tc)) > 0.0, "normal must point outward");
        }
        for c in 0..m.n_components {
            for d in 0..3 {
                assert!(
                    sums[c][d].abs() <= 1e-12 * areas[c],
                    "component {c} axis {d}: {:.3e}",
                    sums[c][d]
                );
            }
        }
    }

    #[test]
    fn flood_fill_idempotent() {
        let mut m = hollow_box(1, 1).unwrap();
        let first = m.component_of_tri.clone();
        classify_boundary(&mut m).unwrap();
        assert_eq!(first, m.component_of_tri);
    }

    #[test]
    fn nodal_normal_clusters_on_cube() {
        let m = unit_cube(2).unwrap();
        let normals = m.nodal_normals();
        // vertex 13-ish: find by coordinates
        let find = |p: Point| {
            m.vertices
                .iter()
                .position(|v| norm(sub(*v, p)) < 1e-12)
                .unwrap()
        };
        let face = find([0.5, 0.5, 0.0]);
        let edge = find([0.5, 0.0, 0.0]);
        let corner = find([0.0, 0.0, 0.0]);
        let center = find([0.5, 0.5, 0.5]);
        assert_eq!(normals[&face].len(), 1);
        assert!(dot(normals[&face][0], [0.0, 0.0, -1.0]) > 1.0 - 1e-12);
        assert_eq!(normals[&edge].len(), 2);
        assert!((dot(normals[&edge][0], normals[&edge][1])).abs() < 1e-12);
        assert_eq!(normals[&corner].len(), 3);
        assert!(!normals.contains_key(&center));
    }

    #[test]
    fn spherical_shell_builds() {
        let m = spherical_shell(2, 2, 0.25, 0.5).unwrap();
        assert_eq!(m.n_components, 2);
        // volume between spheres: 4/3 pi (R^3 - r^3); polyhedral approx is low
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (0.125 - 0.015625);
        let vol = m.volume();
        assert!(
            (vol - exact).abs() < 0.08 * exact,
            "shell volume {vol} vs {exact}"
        );
    }
}
