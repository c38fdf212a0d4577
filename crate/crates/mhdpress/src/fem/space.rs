//! Finite-element spaces with essential constraints encoded as a reduction
//! map from free to full degrees of freedom, plus flux-constraint rows.

use super::shape::{n_local_tet, TET_EDGES};
use crate::error::{Error, Result};
use crate::mesh::{merge_normal, norm, scale, Mesh, Point};
use crate::quadrature::tri_rule;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Vector,
}

/// Essential boundary conditions of a space.
#[derive(Debug, Clone, PartialEq)]
pub enum BcSpec {
    /// No constraints.
    None,
    /// Dirichlet on the listed components (`None` = the whole boundary);
    /// values are supplied at solve time.
    Dirichlet(Option<Vec<usize>>),
    /// v x n = 0: face nodes keep the normal component, edge/corner nodes
    /// (2+ normal clusters) are fully fixed.
    TangentialZero,
    /// TangentialZero plus one flux row <v.n, 1>_Gamma_i = 0 per internal
    /// component.
    TangentialZeroWithFlux,
    /// Scalar space that is zero on Gamma_0 and a single unknown constant
    /// on each internal component (grouped dofs).
    Grouped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeConstraint {
    Free,
    /// Value supplied at solve time (homogeneous unless stated).
    Fixed,
    /// Vector value constrained to the line spanned by the unit normal.
    NormalOnly(Point),
    /// Scalar node tied to the grouped dof of internal component k >= 1.
    Group(usize),
}

/// A boundary face restricted to the space's nodes.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    /// Space node ids: 3 vertex nodes (P1) plus 3 edge nodes (P2),
    /// ordered to match the triangle shape functions.
    pub nodes: Vec<usize>,
    pub normal: Point,
    pub area: f64,
    pub component: usize,
    pub tri: usize,
}

#[derive(Debug)]
pub struct ConstrainedSpace {
    pub mesh: Arc<Mesh>,
    pub kind: Kind,
    pub degree: usize,
    pub bc: BcSpec,
    /// All Lagrange node coordinates (vertices, then edge midpoints for P2).
    pub nodes: Vec<Point>,
    /// Per element, the local-to-global node map (4 or 10 entries).
    pub elem_nodes: Vec<Vec<usize>>,
    pub node_constraint: Vec<NodeConstraint>,
    /// Per full dof: the (free index, weight) it maps to, if any.
    pub free_of_full: Vec<Option<(usize, f64)>>,
    pub n_free: usize,
    /// Flux-constraint rows on full dofs, one per internal component.
    pub flux_rows: Vec<Vec<(usize, f64)>>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// Component of each node that lies on the boundary.
    pub component_of_node: HashMap<usize, usize>,
    /// For Grouped spaces: the free index of each internal component's dof.
    pub group_free: Vec<usize>,
}

impl ConstrainedSpace {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_comp(&self) -> usize {
        match self.kind {
            Kind::Scalar => 1,
            Kind::Vector => 3,
        }
    }

    pub fn n_full(&self) -> usize {
        self.nodes.len() * self.n_comp()
    }

    pub fn n_local(&self) -> usize {
        n_local_tet(self.degree)
    }

    /// Reduce a full-dof matrix: rows by `self`, columns by `trial`.
    pub fn reduce_mat(
        &self,
        a_full: &crate::sparse::SparseMatrix,
        trial: &ConstrainedSpace,
    ) -> crate::sparse::SparseMatrix {
        let mut triplets = Vec::with_capacity(a_full.nnz());
        for (r, c, v) in a_full.iter() {
            if let (Some((fr, wr)), Some((fc, wc))) = (self.free_of_full[r], trial.free_of_full[c])
            {
                triplets.push((fr, fc, wr * wc * v));
            }
        }
        crate::sparse::SparseMatrix::from_triplets(self.n_free, trial.n_free, triplets)
    }

    /// Reduce a full-dof vector (adjoint of the reduction map).
    pub fn reduce_vec(&self, v_full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (full, map) in self.free_of_full.iter().enumerate() {
            if let Some((f, w)) = map {
                out[*f] += w * v_full[full];
            }
        }
        out
    }

    /// Expand free coefficients to full coefficients, inserting `fixed`
    /// values (full-dof indexed) at constrained dofs.
    pub fn expand(&self, free: &[f64], fixed: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full()];
        for (full, map) in self.free_of_full.iter().enumerate() {
            match map {
                Some((f, w)) => out[full] = w * free[*f],
                Option::None => {
                    if let Some(fx) = fixed {
                        out[full] = fx[full];
                    }
                }
            }
        }
        out
    }

    /// rhs correction for nonhomogeneous essential values:
    /// returns reduced( -A_full * fixed ).
    pub fn dirichlet_rhs(
        &self,
        a_full: &crate::sparse::SparseMatrix,
        trial: &ConstrainedSpace,
        fixed: &[f64],
    ) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (r, c, v) in a_full.iter() {
            if let Some((fr, wr)) = self.free_of_full[r] {
                if trial.free_of_full[c].is_none() {
                    out[fr] -= wr * v * fixed[c];
                }
            }
        }
        out
    }

    /// Flux rows reduced to free dofs.
    pub fn flux_rows_free(&self) -> Vec<Vec<(usize, f64)>> {
        self.flux_rows
            .iter()
            .map(|row| {
                let mut m: HashMap<usize, f64> = HashMap::new();
                for &(full, v) in row {
                    if let Some((f, w)) = self.free_of_full[full] {
                        *m.entry(f).or_insert(0.0) += w * v;
                    }
                }
                let mut out: Vec<(usize, f64)> = m.into_iter().collect();
                out.sort_by_key(|e| e.0);
                out
            })
            .collect()
    }
}

/// Build a space.
pub fn build_space(
    mesh: &Arc<Mesh>,
    kind: Kind,
    degree: usize,
    bc: BcSpec,
) -> Result<ConstrainedSpace> {
    if degree != 1 && degree != 2 {
        return Err(Error::UnsupportedDegree(degree));
    }
    // nodes

    let mut nodes: Vec<Point> = mesh.vertices.clone();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elem_nodes: Vec<Vec<usize>> = Vec::with_capacity(mesh.tets.len());
    if degree == 1 {
        for t in &mesh.tets {
            elem_nodes.push(t.to_vec());
        }
    } else {
        for t in &mesh.tets {
            let mut en = t.to_vec();
            for (a, b) in TET_EDGES {
                let key = (t[a].min(t[b]), t[a].max(t[b]));
                let next = nodes.len();
                let id = *edge_id.entry(key).or_insert_with(|| {
                    nodes.push(midpoint(mesh.vertices[key.0], mesh.vertices[key.1]));
                    next
                });
                en.push(id);
            }
            elem_nodes.push(en);
        }
    }
    let n_nodes = nodes.len();

    // boundary faces restricted to space nodes, and node components
    let mut component_of_node: HashMap<usize, usize> = HashMap::new();
    let mut boundary_faces = Vec::with_capacity(mesh.boundary_tris.len());
    for (ti, bt) in mesh.boundary_tris.iter().enumerate() {
        let comp = mesh.component_of_tri[ti];
        let (normal, area) = mesh.tri_normal_area(ti);
        let mut fnodes = bt.verts.to_vec();
        if degree == 2 {
            for (a, b) in super::shape::TRI_EDGES {
                let key = (
                    bt.verts[a].min(bt.verts[b]),
                    bt.verts[a].max(bt.verts[b]),
                );
                let id = *edge_id
                    .get(&key)
                    .expect("boundary edge must appear in some tet");
                fnodes.push(id);
            }
        }
        for &n in &fnodes {
            component_of_node.insert(n, comp);
        }
        boundary_faces.push(BoundaryFace {
            nodes: fnodes,
            normal,
            area,
            component: comp,
            tri: ti,
        });
    }

    // normal clusters per boundary node (vertices via faces at the vertex,
    // P2 edge nodes via faces containing the edge)
    let mut clusters: HashMap<usize, Vec<Point>> = HashMap::new();
    for bf in &boundary_faces {
        for &n in &bf.nodes {
            merge_normal(clusters.entry(n).or_default(), bf.normal);
        }
    }

    // node constraints
    let i_comp = mesh.n_internal_components();
    let mut node_constraint = vec![NodeConstraint::Free; n_nodes];
    match &bc {
        BcSpec::None => {}
        BcSpec::Dirichlet(comps) => {
            for (&n, &c) in &component_of_node {
                let hit = match comps {
                    Some(list) => list.contains(&c),
                    Option::None => true,
                };
                if hit {
                    node_constraint[n] = NodeConstraint::Fixed;
                }
            }
        }
        BcSpec::TangentialZero | BcSpec::TangentialZeroWithFlux => {
            if kind != Kind::Vector {
                return Err(Error::SolveFailure(
                    "tangential constraints need a vector space".into(),
                ));
            }
            for (&n, cl) in &clusters {
                node_constraint[n] = if cl.len() == 1 {
                    NodeConstraint::NormalOnly(scale(cl[0], 1.0 / norm(cl[0])))
                } else {
                    NodeConstraint::Fixed
                };
            }
        }
        BcSpec::Grouped => {
            if kind != Kind::Scalar {
                return Err(Error::SolveFailure("grouped space must be scalar".into()));
            }
            for (&n, &c) in &component_of_node {
                node_constraint[n] = if c == 0 {
                    NodeConstraint::Fixed
                } else {
                    NodeConstraint::Group(c)
                };
            }
        }
    }

    // free dof numbering: nodal dofs first, grouped dofs last
    let n_comp = if kind == Kind::Scalar { 1 } else { 3 };
    let mut free_of_full: Vec<Option<(usize, f64)>> = vec![Option::None; n_nodes * n_comp];
    let mut n_free = 0usize;
    for (n, nc) in node_constraint.iter().enumerate() {
        match nc {
            NodeConstraint::Free => {
                for c in 0..n_comp {
                    free_of_full[n * n_comp + c] = Some((n_free, 1.0));
                    n_free += 1;
                }
            }
            NodeConstraint::NormalOnly(nrm) => {
                for c in 0..3 {
                    free_of_full[n * 3 + c] = Some((n_free, nrm[c]));
                }
                n_free += 1;
            }
            NodeConstraint::Fixed | NodeConstraint::Group(_) => {}
        }
    }
    let mut group_free = Vec::new();
    if bc == BcSpec::Grouped {
        for _k in 1..=i_comp {
            group_free.push(n_free);
            n_free += 1;
        }
        for (n, nc) in node_constraint.iter().enumerate() {
            if let NodeConstraint::Group(k) = nc {
                free_of_full[n] = Some((group_free[*k - 1], 1.0));
            }
        }
    }

    // flux rows: surface quadrature of phi_node * n over each internal
    // component (exact for the trace degree)
    let mut flux_rows = Vec::new();
    if bc == BcSpec::TangentialZeroWithFlux {
        let rule = tri_rule(degree + 1)?;
        let n_ltri = super::shape::n_local_tri(degree);
        for comp in 1..=i_comp {
            let mut row: HashMap<usize, f64> = HashMap::new();
            for bf in boundary_faces.iter().filter(|f| f.component == comp) {
                let scale2 = 2.0 * bf.area; // reference area 1/2
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let mut sh = vec![0.0; n_ltri];
                    super::shape::tri_shape(degree, *p, &mut sh);
                    for (ln, &n) in bf.nodes.iter().enumerate() {
                        for c in 0..3 {
                            *row.entry(n * 3 + c).or_insert(0.0) +=
                                w * scale2 * sh[ln] * bf.normal[c];
                        }
                    }
                }
            }
            let mut entries: Vec<(usize, f64)> = row.into_iter().collect();
            entries.sort_by_key(|e| e.0);
            flux_rows.push(entries);
        }
    }

    Ok(ConstrainedSpace {
        mesh: Arc::clone(mesh),
        kind,
        degree,
        bc,
        nodes,
        elem_nodes,
        node_constraint,
        free_of_full,
        n_free,
        flux_rows,
        boundary_faces,
        component_of_node,
        group_free,
    })
}

fn midpoint(a: Point, b: Point) -> Point {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}

/// Surface integral of `s(x) * (v . n)` over the whole boundary, as a
/// full-dof functional on a vector space.
pub fn boundary_pn_functional(
    space: &ConstrainedSpace,
    s: &dyn Fn(Point) -> f64,
) -> Result<Vec<f64>> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tri_rule(space.degree + 3)?;
    let n_ltri = super::shape::n_local_tri(space.degree);
    let mut out = vec![0.0; space.n_full()];
    for bf in &space.boundary_faces {
        let tri = &space.mesh.boundary_tris[bf.tri];
        let p0 = space.mesh.vertices[tri.verts[0]];
        let p1 = space.mesh.vertices[tri.verts[1]];
        let p2 = space.mesh.vertices[tri.verts[2]];
        let scale2 = 2.0 * bf.area;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = [
                p[0] * p0[0] + p[1] * p1[0] + p[2] * p2[0],
                p[0] * p0[1] + p[1] * p1[1] + p[2] * p2[1],
                p[0] * p0[2] + p[1] * p1[2] + p[2] * p2[2],
            ];
            let sval = s(x);
            let mut sh = vec![0.0; n_ltri];
            super::shape::tri_shape(space.degree, *p, &mut sh);
            for (ln, &n) in bf.nodes.iter().enumerate() {
                for c in 0..3 {
                    out[n * 3 + c] += w * scale2 * sval * sh[ln] * bf.normal[c];
                }
            }
        }
    }
    Ok(out)
}

/// Evaluate a scalar function at the boundary nodes of the listed
/// components and return a full-dof fixed-value vector (zero elsewhere).
pub fn dirichlet_values(space: &ConstrainedSpace, s: &dyn Fn(Point) -> f64) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Scalar);
    let mut out = vec![0.0; space.n_full()];
    for (n, nc) in space.node_constraint.iter().enumerate() {
        if *nc == NodeConstraint::Fixed {
            out[n] = s(space.nodes[n]);
        }
    }
    out
}
