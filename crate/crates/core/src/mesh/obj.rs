use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::point::Point3;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// ASCII OBJ: a header comment, `v x y z` lines, then 1-based `f a b c`.
pub fn write_obj(mesh: &TriangleMesh, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(
        w,
        "# occfield mesh: {} vertices, {} triangles",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for [a, b, c] in &mesh.triangles {
        writeln!(w, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    write_obj(mesh, File::create(path)?)
}

/// Reads `v` and triangular `f` records; `f` entries may use the
/// `v/vt/vn` form and negative indices. Other records are ignored.
pub fn parse_obj(r: impl Read) -> Result<TriangleMesh> {
    let mut mesh = TriangleMesh::default();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    *slot = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad vertex"))?;
                }
                mesh.vertices.push(Point3::from_array(c));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|tok| {
                        let raw: i64 = tok
                            .split('/')
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("bad face index"))?;
                        let n = mesh.vertices.len() as i64;
                        let zero_based = if raw < 0 { n + raw } else { raw - 1 };
                        if zero_based < 0 || zero_based >= n {
                            return Err(bad("face index out of range"));
                        }
                        Ok(zero_based as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face with fewer than 3 vertices"));
                }
                for t in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[t], idx[t + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    parse_obj(File::open(path)?)
}
