//! Text formats: XYZ and ASCII-PLY clouds, descriptor CSV, edge lists.
//!
//! All exports print 9 significant digits so that a save/load round trip
//! reproduces coordinates to the printed precision.

use crate::cloud::PointCloud;
use crate::error::GeomError;
use crate::graph::NeighborGraph;
use crate::local::GeometricDescriptor;
use crate::Vec3;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Supported cloud file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PlyAscii,
}

impl CloudFormat {
    pub fn parse(s: &str) -> Result<Self, GeomError> {
        match s {
            "xyz" | "xyz_ascii" => Ok(CloudFormat::XyzAscii),
            "ply" | "ply_ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(GeomError::InvalidParam(format!("unknown format {other:?}"))),
        }
    }

    /// Guesses the format from a file extension, defaulting to XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::XyzAscii,
        }
    }
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Loads a cloud from disk in the given format.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, GeomError> {
    let text = fs::read_to_string(path).map_err(|e| GeomError::io(path.display().to_string(), e))?;
    match format {
        CloudFormat::XyzAscii => parse_xyz(&text),
        CloudFormat::PlyAscii => parse_ply(&text),
    }
}

fn parse_field(tok: &str, line: usize) -> Result<f64, GeomError> {
    let v: f64 = tok.parse().map_err(|_| GeomError::Parse {
        line,
        message: format!("invalid number {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(GeomError::NonFinite { line });
    }
    Ok(v)
}

/// One point per line, 3 (xyz) or 6 (xyz + normal) whitespace-separated
/// fields; `#` begins a comment line.
pub fn parse_xyz(text: &str) -> Result<PointCloud, GeomError> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(GeomError::Parse {
                line,
                message: format!("expected 3 or 6 fields, found {}", fields.len()),
            });
        }
        let vals: Vec<f64> = fields
            .iter()
            .map(|t| parse_field(t, line))
            .collect::<Result<_, _>>()?;
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        } else if !normals.is_empty() {
            return Err(GeomError::Parse {
                line,
                message: "mixed rows with and without normals".into(),
            });
        }
    }
    let normals = if normals.is_empty() {
        None
    } else if normals.len() == points.len() {
        Some(normals)
    } else {
        return Err(GeomError::Parse {
            line: 0,
            message: "mixed rows with and without normals".into(),
        });
    };
    PointCloud::new(points, normals)
}

/// ASCII PLY subset: element `vertex` with float/double properties
/// x y z and optionally nx ny nz. Anything else is rejected.
pub fn parse_ply(text: &str) -> Result<PointCloud, GeomError> {
    let mut lines = text.lines().enumerate();
    let mut expect = |want: &str| -> Result<(), GeomError> {
        match lines.next() {
            Some((n, l)) if l.trim() == want => {
                let _ = n;
                Ok(())
            }
            Some((n, l)) => Err(GeomError::Parse {
                line: n + 1,
                message: format!("expected {want:?}, found {:?}", l.trim()),
            }),
            None => Err(GeomError::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {want:?}"),
            }),
        }
    };
    expect("ply")?;
    let mut vertex_count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut saw_format = false;
    let mut body_start = 0usize;
    for (n, raw) in &mut lines {
        let line = n + 1;
        let l = raw.trim();
        if l.starts_with("comment") || l.is_empty() {
            continue;
        }
        if l == "format ascii 1.0" {
            saw_format = true;
            continue;
        }
        if let Some(rest) = l.strip_prefix("element ") {
            let mut it = rest.split_whitespace();
            let name = it.next().unwrap_or("");
            let count: usize = it.next().and_then(|c| c.parse().ok()).ok_or(GeomError::Parse {
                line,
                message: "malformed element line".into(),
            })?;
            if name != "vertex" {
                if count > 0 {
                    return Err(GeomError::Parse {
                        line,
                        message: format!("unsupported element {name:?}; only `vertex` is accepted"),
                    });
                }
                continue;
            }
            vertex_count = Some(count);
            continue;
        }
        if let Some(rest) = l.strip_prefix("property ") {
            let mut it = rest.split_whitespace();
            let ty = it.next().unwrap_or("");
            let name = it.next().unwrap_or("");
            if ty != "float" && ty != "double" && ty != "float32" && ty != "float64" {
                return Err(GeomError::Parse {
                    line,
                    message: format!("unsupported property type {ty:?}"),
                });
            }
            props.push(name.to_string());
            continue;
        }
        if l == "end_header" {
            body_start = line;
            break;
        }
        return Err(GeomError::Parse {
            line,
            message: format!("unsupported header line {l:?}"),
        });
    }
    if !saw_format {
        return Err(GeomError::Parse {
            line: 2,
            message: "only `format ascii 1.0` is supported".into(),
        });
    }
    let count = vertex_count.ok_or(GeomError::Parse {
        line: body_start,
        message: "missing `element vertex` declaration".into(),
    })?;
    if count == 0 {
        return Err(GeomError::EmptyCloud);
    }
    let has_normals = match props.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "nx", "ny", "nz"] => true,
        _ => {
            return Err(GeomError::Parse {
                line: body_start,
                message: format!("unsupported vertex properties {props:?}"),
            })
        }
    };
    let mut points = Vec::with_capacity(count);
    let mut normals = if has_normals {
        Some(Vec::with_capacity(count))
    } else {
        None
    };
    for (n, raw) in lines.take(count) {
        let line = n + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let want = if has_normals { 6 } else { 3 };
        if fields.len() != want {
            return Err(GeomError::Parse {
                line,
                message: format!("expected {want} fields, found {}", fields.len()),
            });
        }
        let vals: Vec<f64> = fields
            .iter()
            .map(|t| parse_field(t, line))
            .collect::<Result<_, _>>()?;
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if let Some(ns) = normals.as_mut() {
            ns.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    if points.len() != count {
        return Err(GeomError::Parse {
            line: 0,
            message: format!("header declares {count} vertices, found {}", points.len()),
        });
    }
    PointCloud::new(points, normals)
}

/// Serializes a cloud in the given format (9 significant digits).
pub fn format_cloud(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut out = String::new();
    match format {
        CloudFormat::XyzAscii => {
            for (i, p) in cloud.points().iter().enumerate() {
                let _ = write!(out, "{} {} {}", sig9(p.x), sig9(p.y), sig9(p.z));
                if let Some(ns) = cloud.normals() {
                    let n = ns[i];
                    let _ = write!(out, " {} {} {}", sig9(n.x), sig9(n.y), sig9(n.z));
                }
                out.push('\n');
            }
        }
        CloudFormat::PlyAscii => {
            out.push_str("ply\nformat ascii 1.0\n");
            let _ = writeln!(out, "element vertex {}", cloud.len());
            out.push_str("property double x\nproperty double y\nproperty double z\n");
            if cloud.normals().is_some() {
                out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
            }
            out.push_str("end_header\n");
            for (i, p) in cloud.points().iter().enumerate() {
                let _ = write!(out, "{} {} {}", sig9(p.x), sig9(p.y), sig9(p.z));
                if let Some(ns) = cloud.normals() {
                    let n = ns[i];
                    let _ = write!(out, " {} {} {}", sig9(n.x), sig9(n.y), sig9(n.z));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), GeomError> {
    fs::write(path, format_cloud(cloud, format))
        .map_err(|e| GeomError::io(path.display().to_string(), e))
}

/// Descriptor CSV: header `x,y,z,nx,ny,nz,alpha,beta,gamma`, one row per
/// point in point order.
pub fn format_descriptors_csv(descriptors: &[GeometricDescriptor]) -> String {
    let mut out = String::from("x,y,z,nx,ny,nz,alpha,beta,gamma\n");
    for d in descriptors {
        let row = d.as_array();
        let cells: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_descriptors_csv(
    descriptors: &[GeometricDescriptor],
    path: &Path,
) -> Result<(), GeomError> {
    fs::write(path, format_descriptors_csv(descriptors))
        .map_err(|e| GeomError::io(path.display().to_string(), e))
}

/// Edge list: `src_index dst_index rank` per line, rank being 0-based
/// selection order; header comments carry the construction parameters.
pub fn format_edge_list(graph: &NeighborGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mode {}", graph.mode.name());
    let _ = writeln!(out, "# k {}", graph.k_target);
    if let Some(p) = &graph.params {
        let _ = writeln!(out, "# theta {}", sig9(p.theta));
        let _ = writeln!(out, "# lambda {}", sig9(p.lambda));
        let _ = writeln!(out, "# pool_multiplier {}", p.candidate_multiplier);
    }
    for (src, nbrs) in graph.out_edges().iter().enumerate() {
        for (rank, &dst) in nbrs.iter().enumerate() {
            let _ = writeln!(out, "{src} {dst} {rank}");
        }
    }
    out
}

pub fn save_edge_list(graph: &NeighborGraph, path: &Path) -> Result<(), GeomError> {
    fs::write(path, format_edge_list(graph))
        .map_err(|e| GeomError::io(path.display().to_string(), e))
}
