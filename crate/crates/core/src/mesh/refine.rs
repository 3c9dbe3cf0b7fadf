use super::{SurfaceHint, TriangleMesh};
use crate::error::{Error, Result};
use crate::Vec3;
use std::collections::HashMap;
use std::f64::consts::TAU;

/// One step of Loop subdivision. New positions are pushed back onto the
/// mesh's [`SurfaceHint`] when it carries one.
pub fn refine(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    if !mesh.is_closed() {
        return Err(Error::Unsupported("refinement of open meshes".into()));
    }
    let conn = mesh.connectivity();
    let old = mesh.vertices();
    let nv = old.len();

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(conn.edges.len());
    for (k, e) in conn.edges.iter().enumerate() {
        edge_index.insert((e[0], e[1]), nv + k);
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));

    // Edge points: 3/8 of the endpoints plus 1/8 of the two opposite corners.
    let mut edge_pts = vec![Vec3::zeros(); conn.edges.len()];
    for (k, e) in conn.edges.iter().enumerate() {
        edge_pts[k] = (old[e[0]] + old[e[1]]) * 0.375;
    }
    for f in mesh.faces() {
        for c in 0..3 {
            let (a, b, opp) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
            let k = edge_index[&key(a, b)] - nv;
            edge_pts[k] += old[opp] * 0.125;
        }
    }

    let mut verts = Vec::with_capacity(nv + conn.edges.len());
    for (v, p) in old.iter().enumerate() {
        let nb = conn.neighbors_of(v);
        let n = nb.len() as f64;
        let t = 0.375 + 0.25 * (TAU / n).cos();
        let beta = (0.625 - t * t) / n;
        let sum: Vec3 = nb.iter().map(|&w| old[w]).sum();
        verts.push(p * (1.0 - n * beta) + sum * beta);
    }
    verts.extend(edge_pts);

    if !matches!(mesh.hint(), SurfaceHint::None) {
        for p in &mut verts {
            *p = mesh.hint().project(p);
        }
    }

    let mut faces = Vec::with_capacity(4 * mesh.n_faces());
    for &[a, b, c] in mesh.faces() {
        let ab = edge_index[&key(a, b)];
        let bc = edge_index[&key(b, c)];
        let ca = edge_index[&key(c, a)];
        faces.push([a, ab, ca]);
        faces.push([b, bc, ab]);
        faces.push([c, ca, bc]);
        faces.push([ab, bc, ca]);
    }
    Ok(TriangleMesh::new(verts, faces)?.with_hint(mesh.hint().clone()))
}
