//! File formats: legacy ASCII VTK for meshes with vertex fields, a plain
//! text mesh format, and CSV of vertex values.
//!
//! Plain text mesh:
//!
//! ```text
//! points N triangles M
//! x y            (N lines)
//! a b c          (M lines, zero-based vertex indices)
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point;
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("field {name:?} has {got} values, mesh has {expected} vertices")]
    FieldLength {
        name: String,
        got: usize,
        expected: usize,
    },
}

/// A named vertex field.
pub type Field<'a> = (&'a str, &'a [f64]);

fn check_fields(mesh: &Mesh, fields: &[Field<'_>]) -> Result<(), IoError> {
    for (name, values) in fields {
        if values.len() != mesh.num_vertices() {
            return Err(IoError::FieldLength {
                name: name.to_string(),
                got: values.len(),
                expected: mesh.num_vertices(),
            });
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
}

pub fn write_vtk(
    out: &mut impl Write,
    mesh: &Mesh,
    title: &str,
    fields: &[Field<'_>],
) -> Result<(), IoError> {
    check_fields(mesh, fields)?;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.points() {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    let m = mesh.num_triangles();
    writeln!(out, "CELLS {} {}", m, 4 * m)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
    let boundary: Vec<f64> = mesh
        .boundary()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let all = std::iter::once(("boundary", boundary.as_slice())).chain(fields.iter().copied());
    for (name, values) in all {
        writeln!(out, "SCALARS {} double 1", name.replace(' ', "_"))?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(out, "{v:e}")?;
        }
    }
    Ok(())
}

pub fn save_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &[Field<'_>]) -> Result<(), IoError> {
    let mut out = create(path)?;
    write_vtk(&mut out, mesh, title, fields)?;
    out.flush()?;
    Ok(())
}

pub fn write_mesh_text(out: &mut impl Write, mesh: &Mesh) -> Result<(), IoError> {
    writeln!(
        out,
        "points {} triangles {}",
        mesh.num_vertices(),
        mesh.num_triangles()
    )?;
    for p in mesh.points() {
        writeln!(out, "{:e} {:e}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn save_mesh_text(path: &Path, mesh: &Mesh) -> Result<(), IoError> {
    let mut out = create(path)?;
    write_mesh_text(&mut out, mesh)?;
    out.flush()?;
    Ok(())
}

/// Parses the plain text format; the result feeds
/// [`Mesh::from_triangulation`], which does the geometric validation.
pub fn read_mesh_text(input: impl BufRead) -> Result<(Vec<Point>, Vec<[usize; 3]>), IoError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let parse_err = |line, message: String| IoError::Parse { line, message };
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let header = header?;
    let words: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match words.as_slice() {
        ["points", n, "triangles", m] => (
            n.parse::<usize>()
                .map_err(|e| parse_err(line, format!("point count: {e}")))?,
            m.parse::<usize>()
                .map_err(|e| parse_err(line, format!("triangle count: {e}")))?,
        ),
        _ => {
            return Err(parse_err(
                line,
                format!("expected \"points N triangles M\", got {header:?}"),
            ))
        }
    };
    let mut points = Vec::with_capacity(n);
    let mut triangles = Vec::with_capacity(m);
    for k in 0..n + m {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_err(line + k + 1, "unexpected end of file".into()))?;
        let text = text?;
        let words: Vec<&str> = text.split_whitespace().collect();
        if k < n {
            let coords: Result<Vec<f64>, _> = words.iter().map(|w| w.parse::<f64>()).collect();
            match coords {
                Ok(c) if c.len() == 2 && c.iter().all(|v| v.is_finite()) => points.push([c[0], c[1]]),
                _ => return Err(parse_err(line, format!("expected two coordinates, got {text:?}"))),
            }
        } else {
            let idx: Result<Vec<usize>, _> = words.iter().map(|w| w.parse::<usize>()).collect();
            match idx {
                Ok(i) if i.len() == 3 => triangles.push([i[0], i[1], i[2]]),
                _ => {
                    return Err(parse_err(
                        line,
                        format!("expected three vertex indices, got {text:?}"),
                    ))
                }
            }
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "trailing content after the last triangle".into()));
    }
    Ok((points, triangles))
}

pub fn load_mesh_text(path: &Path) -> Result<(Vec<Point>, Vec<[usize; 3]>), IoError> {
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    read_mesh_text(BufReader::new(file))
}

/// `x,y,<field>...` with one row per vertex.
pub fn write_vertex_csv(out: &mut impl Write, mesh: &Mesh, fields: &[Field<'_>]) -> Result<(), IoError> {
    check_fields(mesh, fields)?;
    write!(out, "x,y")?;
    for (name, _) in fields {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (i, p) in mesh.points().iter().enumerate() {
        write!(out, "{:e},{:e}", p[0], p[1])?;
        for (_, values) in fields {
            write!(out, ",{:e}", values[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_vertex_csv(path: &Path, mesh: &Mesh, fields: &[Field<'_>]) -> Result<(), IoError> {
    let mut out = create(path)?;
    write_vertex_csv(&mut out, mesh, fields)?;
    out.flush()?;
    Ok(())
}
