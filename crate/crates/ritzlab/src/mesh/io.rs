//! Plain-text mesh format.
//!
//! Line 1: `nv nt`. Next `nv` lines: `x y b` (coordinates, boundary flag
//! 0/1). Next `nt` lines: `i j k` (0-based vertex indices,
//! counterclockwise). Tokens are whitespace-separated; `#` starts a
//! comment that runs to the end of the line.

use super::{Mesh, MeshError};
use crate::geometry::Point2;
use std::io::{BufRead, Write};

/// Writes a mesh in the plain-text format. Coordinates use the shortest
/// round-trip decimal representation, so write/read is an identity.
pub fn write_mesh<W: Write>(mesh: &Mesh, sink: &mut W) -> Result<(), MeshError> {
    writeln!(sink, "{} {}", mesh.n_vertices(), mesh.n_triangles())?;
    for i in 0..mesh.n_vertices() {
        let v = mesh.vertex(i);
        let b = if mesh.is_boundary_vertex(i) { 1 } else { 0 };
        writeln!(sink, "{} {} {}", v.x, v.y, b)?;
    }
    for t in 0..mesh.n_triangles() {
        let [i, j, k] = mesh.triangle(t);
        writeln!(sink, "{} {} {}", i, j, k)?;
    }
    Ok(())
}

struct LineReader<'a, R: BufRead> {
    source: &'a mut R,
    line_no: usize,
}

impl<'a, R: BufRead> LineReader<'a, R> {
    /// Next non-empty line after comment stripping, with its 1-based number.
    fn next_content_line(&mut self) -> Result<Option<(usize, Vec<String>)>, MeshError> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self.source.read_line(&mut buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let content = match buf.find('#') {
                Some(pos) => &buf[..pos],
                None => buf.as_str(),
            };
            let fields: Vec<String> = content.split_whitespace().map(String::from).collect();
            if !fields.is_empty() {
                return Ok(Some((self.line_no, fields)));
            }
        }
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, MeshError> {
    s.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid {what}: {s:?}"),
    })
}

/// Reads a mesh from the plain-text format. Boundary flags are re-derived
/// from connectivity; the file's flag column is validated as 0/1 only.
pub fn read_mesh<R: BufRead>(source: &mut R) -> Result<Mesh, MeshError> {
    let mut reader = LineReader { source, line_no: 0 };
    let (line, header) = reader.next_content_line()?.ok_or(MeshError::Parse {
        line: 1,
        message: "empty file, expected header `nv nt`".into(),
    })?;
    if header.len() != 2 {
        return Err(MeshError::Parse {
            line,
            message: format!("expected `nv nt`, got {} fields", header.len()),
        });
    }
    let nv: usize = parse_field(&header[0], line, "vertex count")?;
    let nt: usize = parse_field(&header[1], line, "triangle count")?;

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (line, fields) = reader.next_content_line()?.ok_or(MeshError::Parse {
            line: reader.line_no + 1,
            message: format!("file ended before vertex {i} of {nv}"),
        })?;
        if fields.len() != 3 {
            return Err(MeshError::Parse {
                line,
                message: format!("expected `x y b`, got {} fields", fields.len()),
            });
        }
        let x: f64 = parse_field(&fields[0], line, "x coordinate")?;
        let y: f64 = parse_field(&fields[1], line, "y coordinate")?;
        let b: u8 = parse_field(&fields[2], line, "boundary flag")?;
        if b > 1 {
            return Err(MeshError::Parse {
                line,
                message: format!("boundary flag must be 0 or 1, got {b}"),
            });
        }
        vertices.push(Point2::new(x, y));
    }

    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let (line, fields) = reader.next_content_line()?.ok_or(MeshError::Parse {
            line: reader.line_no + 1,
            message: format!("file ended before triangle {t} of {nt}"),
        })?;
        if fields.len() != 3 {
            return Err(MeshError::Parse {
                line,
                message: format!("expected `i j k`, got {} fields", fields.len()),
            });
        }
        let mut tri = [0usize; 3];
        for (slot, f) in fields.iter().enumerate() {
            tri[slot] = parse_field(f, line, "vertex index")?;
        }
        triangles.push(tri);
    }

    if let Some((line, _)) = reader.next_content_line()? {
        return Err(MeshError::Parse {
            line,
            message: "trailing content after last triangle".into(),
        });
    }

    Mesh::from_raw(vertices, triangles)
}
