use std::collections::HashMap;

/// Sentinel stored in `twin` for half-edges without an opposite partner.
pub const NO_TWIN: usize = usize::MAX;

/// Half-edge tables for a triangle soup.
///
/// Half-edge `h` belongs to face `h / 3` and runs from corner `h % 3` to the
/// next corner, so `face` and `next` are implicit. Only `origin` and `twin`
/// are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    pub origin: Vec<usize>,
    pub twin: Vec<usize>,
    /// Undirected edges, `a < b`.
    pub edges: Vec<[usize; 2]>,
    pub vertex_faces_offsets: Vec<usize>,
    pub vertex_faces: Vec<usize>,
    pub vertex_neighbors_offsets: Vec<usize>,
    pub vertex_neighbors: Vec<usize>,
    pub boundary_vertex: Vec<bool>,
    /// Edges with more than two incident faces.
    pub non_manifold_edges: Vec<[usize; 2]>,
    /// Edges shared by two faces traversing them in the same direction.
    pub inconsistent_edges: Vec<[usize; 2]>,
    /// Vertices whose incident faces do not form a single fan.
    pub non_manifold_vertices: Vec<usize>,
    pub boundary_loops: usize,
}

#[inline]
pub fn next(h: usize) -> usize {
    3 * (h / 3) + (h % 3 + 1) % 3
}

#[inline]
pub fn face_of(h: usize) -> usize {
    h / 3
}

impl Connectivity {
    pub fn build(n_vertices: usize, faces: &[[usize; 3]]) -> Self {
        let n_half = 3 * faces.len();
        let mut origin = Vec::with_capacity(n_half);
        for f in faces {
            origin.extend_from_slice(f);
        }
        let target = |h: usize| origin[next(h)];

        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(n_half);
        for h in 0..n_half {
            let (a, b) = (origin[h], target(h));
            by_edge.entry((a.min(b), a.max(b))).or_default().push(h);
        }

        let mut twin = vec![NO_TWIN; n_half];
        let mut edges = Vec::with_capacity(by_edge.len());
        let mut non_manifold_edges = Vec::new();
        let mut inconsistent_edges = Vec::new();
        let mut boundary_vertex = vec![false; n_vertices];
        let mut boundary_half = Vec::new();
        let mut keys: Vec<_> = by_edge.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let hs = &by_edge[&key];
            edges.push([key.0, key.1]);
            match hs.len() {
                1 => {
                    boundary_vertex[key.0] = true;
                    boundary_vertex[key.1] = true;
                    boundary_half.push(hs[0]);
                }
                2 => {
                    let (h0, h1) = (hs[0], hs[1]);
                    if origin[h0] == origin[h1] {
                        inconsistent_edges.push([key.0, key.1]);
                    } else {
                        twin[h0] = h1;
                        twin[h1] = h0;
                    }
                }
                _ => non_manifold_edges.push([key.0, key.1]),
            }
        }

        let mut vf_count = vec![0usize; n_vertices + 1];
        for f in faces {
            for &v in f {
                vf_count[v + 1] += 1;
            }
        }
        for i in 0..n_vertices {
            vf_count[i + 1] += vf_count[i];
        }
        let vertex_faces_offsets = vf_count.clone();
        let mut fill = vf_count;
        let mut vertex_faces = vec![0; 3 * faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[fill[v]] = fi;
                fill[v] += 1;
            }
        }

        let mut nb_count = vec![0usize; n_vertices + 1];
        for e in &edges {
            nb_count[e[0] + 1] += 1;
            nb_count[e[1] + 1] += 1;
        }
        for i in 0..n_vertices {
            nb_count[i + 1] += nb_count[i];
        }
        let vertex_neighbors_offsets = nb_count.clone();
        let mut fill = nb_count;
        let mut vertex_neighbors = vec![0; 2 * edges.len()];
        for e in &edges {
            vertex_neighbors[fill[e[0]]] = e[1];
            fill[e[0]] += 1;
            vertex_neighbors[fill[e[1]]] = e[0];
            fill[e[1]] += 1;
        }

        // A manifold fan has as many neighbours as faces (closed) or one more (open).
        let mut non_manifold_vertices = Vec::new();
        for v in 0..n_vertices {
            let nf = vertex_faces_offsets[v + 1] - vertex_faces_offsets[v];
            let nn = vertex_neighbors_offsets[v + 1] - vertex_neighbors_offsets[v];
            if nf == 0 {
                continue;
            }
            let expected = if boundary_vertex[v] { nf + 1 } else { nf };
            if nn != expected {
                non_manifold_vertices.push(v);
            }
        }

        let boundary_loops = count_loops(&origin, &boundary_half);

        Connectivity {
            origin,
            twin,
            edges,
            vertex_faces_offsets,
            vertex_faces,
            vertex_neighbors_offsets,
            vertex_neighbors,
            boundary_vertex,
            non_manifold_edges,
            inconsistent_edges,
            non_manifold_vertices,
            boundary_loops,
        }
    }

    pub fn faces_of(&self, v: usize) -> &[usize] {
        &self.vertex_faces[self.vertex_faces_offsets[v]..self.vertex_faces_offsets[v + 1]]
    }

    pub fn neighbors_of(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[self.vertex_neighbors_offsets[v]..self.vertex_neighbors_offsets[v + 1]]
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_vertex.iter().all(|b| !b) && self.inconsistent_edges.is_empty()
    }
}

fn count_loops(origin: &[usize], boundary_half: &[usize]) -> usize {
    // successor of boundary half-edge a->b is the boundary half-edge leaving b
    let mut leaving: HashMap<usize, usize> = HashMap::new();
    for (i, &h) in boundary_half.iter().enumerate() {
        leaving.insert(origin[h], i);
    }
    let mut seen = vec![false; boundary_half.len()];
    let mut loops = 0;
    for start in 0..boundary_half.len() {
        if seen[start] {
            continue;
        }
        loops += 1;
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            let end = origin[next(boundary_half[cur])];
            match leaving.get(&end) {
                Some(&n) => cur = n,
                None => break,
            }
        }
    }
    loops
}
