use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::Vec3;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("off") => Ok(MeshFormat::Off),
            _ => Err(Error::Unsupported(format!("mesh format of {}", path.display()))),
        }
    }
}

fn input(line: usize, reason: impl Into<String>) -> Error {
    Error::Input { line, reason: reason.into() }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| input(line, "missing coordinate"))?;
    tok.parse::<f64>().map_err(|_| input(line, format!("invalid number `{tok}`")))
}

/// Reads an ASCII OBJ or OFF triangle mesh; the format follows the extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let mesh = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => parse_obj(&text)?,
        MeshFormat::Off => parse_off(&text)?,
    };
    let c = mesh.connectivity();
    if !c.non_manifold_edges.is_empty() || !c.non_manifold_vertices.is_empty() {
        return Err(input(0, "non-manifold input"));
    }
    Ok(mesh)
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        let mut toks = body.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line)?;
                let y = parse_f64(toks.next(), line)?;
                let z = parse_f64(toks.next(), line)?;
                verts.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(input(line, format!("non-triangular face at line {line}")));
                }
                let mut face = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| input(line, format!("invalid index `{tok}`")))?;
                    let resolved = if i > 0 { i - 1 } else { verts.len() as i64 + i };
                    if resolved < 0 || resolved as usize >= verts.len() {
                        return Err(input(line, format!("index {i} out of range")));
                    }
                    face[k] = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    if verts.is_empty() || faces.is_empty() {
        return Err(input(text.lines().count().max(1), "no vertices or faces found"));
    }
    TriangleMesh::new(verts, faces).map_err(|e| input(0, e.to_string()))
}

pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| input(1, "empty file"))?;
    let mut counts_tokens: Vec<&str> = header.split_whitespace().collect();
    if counts_tokens.first() != Some(&"OFF") {
        return Err(input(hl, "missing OFF header"));
    }
    counts_tokens.remove(0);
    let (cl, counts_tokens) = if counts_tokens.is_empty() {
        let (cl, l) = lines.next().ok_or_else(|| input(hl + 1, "missing counts line"))?;
        (cl, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (hl, counts_tokens)
    };
    if counts_tokens.len() < 2 {
        return Err(input(cl, "counts line needs vertex and face counts"));
    }
    let nv: usize = counts_tokens[0].parse().map_err(|_| input(cl, "invalid vertex count"))?;
    let nf: usize = counts_tokens[1].parse().map_err(|_| input(cl, "invalid face count"))?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or_else(|| input(cl, "unexpected end of file in vertex list"))?;
        let mut t = l.split_whitespace();
        verts.push(Vec3::new(parse_f64(t.next(), line)?, parse_f64(t.next(), line)?, parse_f64(t.next(), line)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or_else(|| input(cl, "unexpected end of file in face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let n: usize = t.first().and_then(|s| s.parse().ok()).ok_or_else(|| input(line, "invalid face"))?;
        if n != 3 {
            return Err(input(line, format!("non-triangular face at line {line}")));
        }
        if t.len() < 4 {
            return Err(input(line, "face lists fewer than 3 indices"));
        }
        let mut face = [0usize; 3];
        for k in 0..3 {
            let i: usize = t[k + 1].parse().map_err(|_| input(line, format!("invalid index `{}`", t[k + 1])))?;
            if i >= nv {
                return Err(input(line, format!("index {i} out of range")));
            }
            face[k] = i;
        }
        faces.push(face);
    }
    if faces.is_empty() {
        return Err(input(cl, "no faces"));
    }
    TriangleMesh::new(verts, faces).map_err(|e| input(0, e.to_string()))
}

/// Writes positions with 17 significant digits.
pub fn format_mesh(mesh: &TriangleMesh, format: MeshFormat) -> String {
    let mut s = String::new();
    match format {
        MeshFormat::Obj => {
            for p in mesh.vertices() {
                let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::Off => {
            let _ = writeln!(s, "OFF\n{} {} {}", mesh.n_vertices(), mesh.n_faces(), mesh.n_edges());
            for p in mesh.vertices() {
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
    }
    s
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let format = MeshFormat::from_path(path)?;
    std::fs::write(path, format_mesh(mesh, format))?;
    Ok(())
}
