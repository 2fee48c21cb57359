//! Binary little-endian splat PLY: logit opacity, log scales, `wxyz`
//! quaternion (`rot_0` = w), `f_dc_*` plus channel-major `f_rest_*`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};

use super::{GaussianKernel, SplatScene, SH_COEFFS};
use crate::error::{Error, Result};
use crate::math::Vec3;

const REST_PER_CHANNEL: usize = SH_COEFFS - 1;
const OPACITY_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

struct Header {
    count: usize,
    stride: usize,
    props: Vec<Property>,
}

impl Header {
    fn offset(&self, name: &str) -> Option<(usize, ScalarType)> {
        self.props
            .iter()
            .find(|p| p.name == name)
            .map(|p| (p.offset, p.ty))
    }

    fn require(&self, name: &str) -> Result<(usize, ScalarType)> {
        self.offset(name)
            .ok_or_else(|| Error::format(format!("PLY header is missing property `{name}`")))
    }
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |reader: &mut R| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format("unexpected end of file in PLY header"));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    };

    if next_line(reader)? != "ply" {
        return Err(Error::format("missing `ply` magic"));
    }
    let mut count = None;
    let mut in_vertex = false;
    let mut props = Vec::new();
    let mut stride = 0;
    loop {
        let l = next_line(reader)?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::format(format!("unsupported PLY format `{fmt}`")));
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|_| {
                        Error::format(format!("bad vertex count `{n}`"))
                    })?);
                } else if count.is_none() {
                    return Err(Error::format(format!("element `{name}` precedes vertex element")));
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(Error::format("list properties are not supported on vertices"));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = ScalarType::parse(ty).ok_or_else(|| {
                        Error::format(format!("property `{name}` has unknown type `{ty}`"))
                    })?;
                    props.push(Property {
                        name: name.to_string(),
                        ty,
                        offset: stride,
                    });
                    stride += ty.size();
                }
            }
            _ => return Err(Error::format(format!("malformed PLY header line `{l}`"))),
        }
    }
    let count = count.ok_or_else(|| Error::format("PLY header has no vertex element"))?;
    Ok(Header {
        count,
        stride,
        props,
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(OPACITY_CLAMP, 1.0 - OPACITY_CLAMP);
    (p / (1.0 - p)).ln()
}

pub fn read_ply<R: Read>(reader: R) -> Result<SplatScene> {
    let mut reader = BufReader::new(reader);
    let header = parse_header(&mut reader)?;

    let pos = ["x", "y", "z"].map(|n| header.require(n));
    let scale = ["scale_0", "scale_1", "scale_2"].map(|n| header.require(n));
    let rot = ["rot_0", "rot_1", "rot_2", "rot_3"].map(|n| header.require(n));
    let dc = ["f_dc_0", "f_dc_1", "f_dc_2"].map(|n| header.require(n));
    let opacity = header.require("opacity")?;
    let pos = pos.into_iter().collect::<Result<Vec<_>>>()?;
    let scale = scale.into_iter().collect::<Result<Vec<_>>>()?;
    let rot = rot.into_iter().collect::<Result<Vec<_>>>()?;
    let dc = dc.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rest = Vec::new();
    while let Some(p) = header.offset(&format!("f_rest_{}", rest.len())) {
        rest.push(p);
    }
    if rest.len() % 3 != 0 || rest.len() / 3 > REST_PER_CHANNEL {
        return Err(Error::format(format!(
            "unsupported number of `f_rest_*` properties: {}",
            rest.len()
        )));
    }
    let rest_per_channel = rest.len() / 3;
    let label = header.offset("label");

    let mut buf = vec![0u8; header.stride];
    let mut kernels = Vec::with_capacity(header.count);
    for record in 0..header.count {
        reader.read_exact(&mut buf).map_err(|e| {
            Error::format(format!("truncated PLY body at record {record}: {e}"))
        })?;
        let get = |(off, ty): (usize, ScalarType), field: &str| -> Result<f64> {
            let v = ty.read(&buf[off..]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    record,
                    field: field.to_string(),
                })
            }
        };
        let center = Vec3::new(get(pos[0], "x")?, get(pos[1], "y")?, get(pos[2], "z")?);
        let scales = Vec3::new(
            get(scale[0], "scale_0")?.exp(),
            get(scale[1], "scale_1")?.exp(),
            get(scale[2], "scale_2")?.exp(),
        );
        let q = Quaternion::new(
            get(rot[0], "rot_0")?,
            get(rot[1], "rot_1")?,
            get(rot[2], "rot_2")?,
            get(rot[3], "rot_3")?,
        );
        if q.norm() == 0.0 {
            return Err(Error::format(format!("zero quaternion in record {record}")));
        }
        let mut kernel = GaussianKernel::new(
            center,
            scales,
            UnitQuaternion::from_quaternion(q),
            sigmoid(get(opacity, "opacity")?),
        );
        for c in 0..3 {
            kernel.sh[c][0] = get(dc[c], "f_dc")?;
            for i in 0..rest_per_channel {
                kernel.sh[c][1 + i] = get(rest[c * rest_per_channel + i], "f_rest")?;
            }
        }
        if let Some(l) = label {
            kernel.label = get(l, "label")? as i32;
        }
        kernels.push(kernel);
    }
    Ok(SplatScene::new(kernels))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<SplatScene> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::at_path(path, e))?;
    read_ply(file)
}

/// `f32` quaternion that survives a load/store cycle unchanged: normalizing
/// it in `f64` and rounding back yields the same bits.
fn stable_quaternion(q: &UnitQuaternion<f64>) -> [f32; 4] {
    let q = q.quaternion();
    let mut w = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
    for _ in 0..8 {
        let n = w.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        let next = w.map(|v| (v as f64 / n) as f32);
        if next == w {
            break;
        }
        w = next;
    }
    w
}

pub fn write_ply<W: Write>(scene: &SplatScene, writer: W) -> Result<()> {
    if scene.kernels.is_empty() {
        return Err(Error::EmptyScene);
    }
    let mut w = BufWriter::new(writer);
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", scene.kernels.len()));
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"].map(String::from).to_vec();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..3 * REST_PER_CHANNEL).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;

    let mut record: Vec<f32> = Vec::with_capacity(names.len());
    for k in &scene.kernels {
        record.clear();
        record.extend([k.center.x, k.center.y, k.center.z].map(|v| v as f32));
        record.extend([0.0f32; 3]);
        record.extend((0..3).map(|c| k.sh[c][0] as f32));
        for c in 0..3 {
            record.extend(k.sh[c][1..].iter().map(|&v| v as f32));
        }
        record.push(logit(k.opacity) as f32);
        record.extend(k.scales.iter().map(|s| s.ln() as f32));
        record.extend(stable_quaternion(&k.rotation));
        for v in &record {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_ply(scene: &SplatScene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if scene.kernels.is_empty() {
        return Err(Error::EmptyScene);
    }
    let file = File::create(path).map_err(|e| Error::at_path(path, e))?;
    write_ply(scene, file)
}
