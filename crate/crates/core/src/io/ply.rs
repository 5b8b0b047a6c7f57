use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{read_file, write_file, IoError};
use crate::scene::{sh_basis_len, sh_len, GaussianSplat, Scene, MAX_SH_DEGREE};

/// Scalar width of the vertex properties written to disk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlyPrecision {
    /// `float` properties, the layout third-party splat viewers expect.
    #[default]
    F32,
    /// `double` properties; round-trips every `f64` parameter exactly.
    F64,
}

impl PlyPrecision {
    fn type_name(self) -> &'static str {
        match self {
            PlyPrecision::F32 => "float",
            PlyPrecision::F64 => "double",
        }
    }

    fn width(self) -> usize {
        match self {
            PlyPrecision::F32 => 4,
            PlyPrecision::F64 => 8,
        }
    }
}

fn property_names(sh_degree: usize) -> Vec<String> {
    let rest = sh_basis_len(sh_degree) - 1;
    let mut names: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..3 * rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

/// Flatten one splat in property order. `f_rest` is channel-major while the
/// in-memory SH is coefficient-major.
fn splat_values(s: &GaussianSplat, sh_degree: usize, out: &mut Vec<f64>) {
    let rest = sh_basis_len(sh_degree) - 1;
    out.extend_from_slice(&s.mean);
    out.extend_from_slice(&s.sh[..3]);
    for ch in 0..3 {
        for k in 1..=rest {
            out.push(s.sh[3 * k + ch]);
        }
    }
    out.push(s.opacity_raw);
    out.extend_from_slice(&s.scale_raw);
    out.extend_from_slice(&s.rotation_raw);
}

/// Serialize to binary little-endian PLY. The SH degree and background are
/// kept in header comments.
pub fn write_ply(scene: &Scene, precision: PlyPrecision) -> Result<Vec<u8>, IoError> {
    scene.validate()?;
    let names = property_names(scene.sh_degree);
    let [r, g, b] = scene.background;
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\ncomment sh_degree {}\ncomment background {r} {g} {b}\nelement vertex {}\n",
        scene.sh_degree,
        scene.len()
    );
    for n in &names {
        header.push_str(&format!("property {} {n}\n", precision.type_name()));
    }
    header.push_str("end_header\n");

    let mut bytes = header.into_bytes();
    let mut values = Vec::with_capacity(names.len());
    let mut word = [0u8; 8];
    for s in &scene.splats {
        values.clear();
        splat_values(s, scene.sh_degree, &mut values);
        for &v in &values {
            match precision {
                PlyPrecision::F32 => LittleEndian::write_f32(&mut word, v as f32),
                PlyPrecision::F64 => LittleEndian::write_f64(&mut word, v),
            }
            bytes.extend_from_slice(&word[..precision.width()]);
        }
    }
    Ok(bytes)
}

struct Header {
    vertices: usize,
    properties: Vec<(String, PlyPrecision)>,
    sh_degree: Option<usize>,
    background: [f64; 3],
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, IoError> {
    let bad = |m: String| IoError::Parse(format!("PLY header: {m}"));
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("not ASCII".into()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing magic".into()));
    }
    let mut header = Header {
        vertices: 0,
        properties: Vec::new(),
        sh_degree: None,
        background: [0.0; 3],
        body_offset: end + END.len(),
    };
    let mut seen_format = false;
    let mut in_vertex = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["format", "binary_little_endian", "1.0"] => seen_format = true,
            ["format", other, ..] => return Err(bad(format!("unsupported format {other}"))),
            ["comment", "sh_degree", d] => {
                header.sh_degree = Some(d.parse().map_err(|_| bad("bad sh_degree".into()))?)
            }
            ["comment", "background", r, g, b] => {
                for (dst, s) in header.background.iter_mut().zip([r, g, b]) {
                    *dst = s.parse().map_err(|_| bad("bad background".into()))?;
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                header.vertices = n.parse().map_err(|_| bad("bad vertex count".into()))?;
                in_vertex = true;
            }
            ["element", name, n] => {
                if *n != "0" {
                    return Err(bad(format!("unsupported element {name}")));
                }
                in_vertex = false;
            }
            ["property", ty, name] if in_vertex => {
                let p = match *ty {
                    "float" | "float32" => PlyPrecision::F32,
                    "double" | "float64" => PlyPrecision::F64,
                    other => return Err(bad(format!("unsupported property type {other}"))),
                };
                header.properties.push((name.to_string(), p));
            }
            ["property", ..] if in_vertex => return Err(bad(format!("unsupported property `{line}`"))),
            ["property", ..] => {}
            _ => return Err(bad(format!("unexpected line `{line}`"))),
        }
    }
    if !seen_format {
        return Err(bad("missing format line".into()));
    }
    Ok(header)
}

/// Parse a binary little-endian PLY. Extra vertex properties (for example
/// normals) are ignored; the SH degree is inferred from the `f_rest` count.
pub fn read_ply(bytes: &[u8]) -> Result<Scene, IoError> {
    let header = parse_header(bytes)?;
    let count_rest = header.properties.iter().filter(|(n, _)| n.starts_with("f_rest_")).count();
    let sh_degree = (0..=MAX_SH_DEGREE)
        .find(|&d| 3 * (sh_basis_len(d) - 1) == count_rest)
        .ok_or_else(|| IoError::Parse(format!("{count_rest} f_rest properties match no SH degree")))?;
    if let Some(d) = header.sh_degree {
        if d != sh_degree {
            return Err(IoError::Parse(format!(
                "header declares SH degree {d} but properties imply {sh_degree}"
            )));
        }
    }

    let mut offsets = Vec::with_capacity(header.properties.len());
    let mut stride = 0;
    for (_, p) in &header.properties {
        offsets.push(stride);
        stride += p.width();
    }
    let locate = |name: &str| -> Result<(usize, PlyPrecision), IoError> {
        header
            .properties
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| (offsets[i], header.properties[i].1))
            .ok_or_else(|| IoError::Parse(format!("missing vertex property {name}")))
    };
    let wanted = property_names(sh_degree)
        .iter()
        .map(|n| locate(n))
        .collect::<Result<Vec<_>, _>>()?;

    let body = &bytes[header.body_offset..];
    if body.len() < stride * header.vertices {
        return Err(IoError::Parse(format!(
            "PLY body holds {} bytes, expected {}",
            body.len(),
            stride * header.vertices
        )));
    }
    let rest = sh_basis_len(sh_degree) - 1;
    let mut scene = Scene::new(sh_degree, header.background)?;
    let mut values = vec![0.0; wanted.len()];
    for row in body.chunks_exact(stride).take(header.vertices) {
        for (v, &(off, p)) in values.iter_mut().zip(&wanted) {
            *v = match p {
                PlyPrecision::F32 => f64::from(LittleEndian::read_f32(&row[off..])),
                PlyPrecision::F64 => LittleEndian::read_f64(&row[off..]),
            };
        }
        let mut sh = vec![0.0; sh_len(sh_degree)];
        sh[..3].copy_from_slice(&values[3..6]);
        for ch in 0..3 {
            for k in 1..=rest {
                sh[3 * k + ch] = values[6 + ch * rest + (k - 1)];
            }
        }
        let o = 6 + 3 * rest;
        let splat = GaussianSplat {
            mean: [values[0], values[1], values[2]],
            sh,
            opacity_raw: values[o],
            scale_raw: [values[o + 1], values[o + 2], values[o + 3]],
            rotation_raw: [values[o + 4], values[o + 5], values[o + 6], values[o + 7]],
        };
        scene.push(splat)?;
    }
    Ok(scene)
}

pub fn save_ply(path: &Path, scene: &Scene) -> Result<(), IoError> {
    save_ply_with(path, scene, PlyPrecision::default())
}

pub fn save_ply_with(path: &Path, scene: &Scene, precision: PlyPrecision) -> Result<(), IoError> {
    write_file(path, &write_ply(scene, precision)?)
}

pub fn load_ply(path: &Path) -> Result<Scene, IoError> {
    read_ply(&read_file(path)?)
}
