// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Wavefront OBJ and PLY readers/writers. Units are metres throughout.
//!
//! Both mesh loaders reject polygons that are not triangles. The PLY reader
//! understands ascii and binary (either endianness) files with arbitrary
//! extra elements and properties; the writer emits binary little-endian with
//! double-precision coordinates.

use std::io::{BufRead, Read, Write};

use super::{GeometryError, TriMesh, Vec3};

fn fmt_err(msg: impl Into<String>) -> GeometryError {
    GeometryError::Format(msg.into())
}

/// Writes named objects into one OBJ file; vertex indices are global.
pub fn write_obj<W: Write>(mut w: W, objects: &[(&str, &TriMesh)]) -> Result<(), GeometryError> {
    writeln!(w, "# ribvf mesh, units: metres")?;
    let mut base = 1;
    for (name, mesh) in objects {
        if !name.is_empty() {
            writeln!(w, "o {name}")?;
        }
        for v in mesh.vertices() {
            writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + base, f[1] + base, f[2] + base)?;
        }
        base += mesh.vertices().len();
    }
    Ok(())
}

struct ObjFile {
    vertices: Vec<Vec3>,
    objects: Vec<(String, Vec<[usize; 3]>)>,
}

fn parse_obj<R: BufRead>(r: R) -> Result<ObjFile, GeometryError> {
    let mut vertices = Vec::new();
    let mut objects: Vec<(String, Vec<[usize; 3]>)> = vec![(String::new(), Vec::new())];
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| fmt_err(format!("line {}: {e}", lineno + 1)))?;
                if c.len() != 3 {
                    return Err(fmt_err(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| fmt_err(format!("line {}: bad index {tok}", lineno + 1)))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        usize::try_from(resolved).map_err(|_| fmt_err(format!("line {}: bad index {tok}", lineno + 1)))
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(fmt_err(format!(
                        "line {}: face with {} vertices; only triangles are accepted",
                        lineno + 1,
                        idx.len()
                    )));
                }
                objects.last_mut().expect("non-empty").1.push([idx[0], idx[1], idx[2]]);
            }
            Some("o") | Some("g") => {
                let name = it.collect::<Vec<_>>().join(" ");
                objects.push((name, Vec::new()));
            }
            _ => {}
        }
    }
    objects.retain(|(_, f)| !f.is_empty());
    Ok(ObjFile { vertices, objects })
}

/// Reads every face of an OBJ file into one mesh.
pub fn read_obj<R: BufRead>(r: R) -> Result<TriMesh, GeometryError> {
    let file = parse_obj(r)?;
    let faces = file.objects.into_iter().flat_map(|(_, f)| f).collect();
    TriMesh::new(file.vertices, faces)
}

/// Reads OBJ objects separately, with their names; each object keeps only
/// the vertices it references.
pub fn read_obj_objects<R: BufRead>(r: R) -> Result<Vec<(String, TriMesh)>, GeometryError> {
    let file = parse_obj(r)?;
    let mut out = Vec::new();
    for (name, faces) in file.objects {
        let mut remap = std::collections::HashMap::new();
        let mut verts = Vec::new();
        let mut local = Vec::with_capacity(faces.len());
        for f in faces {
            let mut g = [0; 3];
            for k in 0..3 {
                let v = *file
                    .vertices
                    .get(f[k])
                    .ok_or_else(|| fmt_err(format!("object {name}: vertex index {} out of range", f[k] + 1)))?;
                g[k] = *remap.entry(f[k]).or_insert_with(|| {
                    verts.push(v);
                    verts.len() - 1
                });
            }
            local.push(g);
        }
        out.push((name, TriMesh::new(verts, local)?));
    }
    Ok(out)
}

/// Binary little-endian PLY with double coordinates and int face indices.
pub fn write_ply<W: Write>(mut w: W, mesh: &TriMesh) -> Result<(), GeometryError> {
    write_ply_header(&mut w, mesh.vertices().len(), Some(mesh.face_count()))?;
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for f in mesh.faces() {
        w.write_all(&[3u8])?;
        for &i in f {
            let i = i32::try_from(i).map_err(|_| fmt_err("vertex index exceeds PLY int range"))?;
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Binary little-endian PLY point cloud.
pub fn write_ply_points<W: Write>(mut w: W, points: &[Vec3]) -> Result<(), GeometryError> {
    write_ply_header(&mut w, points.len(), None)?;
    for v in points {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_ply_header<W: Write>(w: &mut W, vertices: usize, faces: Option<usize>) -> Result<(), GeometryError> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "comment units metres")?;
    writeln!(w, "element vertex {vertices}")?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if let Some(f) = faces {
        writeln!(w, "element face {f}")?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Result<Self, GeometryError> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(fmt_err(format!("unknown PLY type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

struct PlyData {
    vertices: Vec<Vec3>,
    faces: Vec<Vec<usize>>,
}

fn read_scalar_bin<R: Read>(r: &mut R, t: Scalar, enc: Encoding) -> Result<f64, GeometryError> {
    let mut buf = [0u8; 8];
    let n = t.size();
    r.read_exact(&mut buf[..n]).map_err(|_| fmt_err("unexpected end of PLY data"))?;
    let b = &buf[..n];
    macro_rules! conv {
        ($ty:ty) => {{
            let arr: [u8; std::mem::size_of::<$ty>()] = b.try_into().expect("sized");
            (if enc == Encoding::Little { <$ty>::from_le_bytes(arr) } else { <$ty>::from_be_bytes(arr) }) as f64
        }};
    }
    Ok(match t {
        Scalar::I8 => b[0] as i8 as f64,
        Scalar::U8 => b[0] as f64,
        Scalar::I16 => conv!(i16),
        Scalar::U16 => conv!(u16),
        Scalar::I32 => conv!(i32),
        Scalar::U32 => conv!(u32),
        Scalar::F32 => conv!(f32),
        Scalar::F64 => conv!(f64),
    })
}

fn parse_ply<R: BufRead>(mut r: R) -> Result<PlyData, GeometryError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(fmt_err("missing PLY magic"));
    }
    let mut enc = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(fmt_err("PLY header not terminated"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", f, _] => {
                enc = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(fmt_err(format!("unknown PLY format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| fmt_err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => elements
                .last_mut()
                .ok_or_else(|| fmt_err("property before element"))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(ct)?, Scalar::parse(it)?)),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| fmt_err("property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            ["end_header"] => break,
            _ => {}
        }
    }
    let enc = enc.ok_or_else(|| fmt_err("PLY format line missing"))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut ascii_tokens: Vec<String> = Vec::new();
    let mut ascii_pos = 0;
    if enc == Encoding::Ascii {
        let mut rest = String::new();
        r.read_to_string(&mut rest)?;
        ascii_tokens = rest.split_whitespace().map(str::to_owned).collect();
    }
    let mut next = |t: Scalar, r: &mut R| -> Result<f64, GeometryError> {
        if enc == Encoding::Ascii {
            let tok = ascii_tokens.get(ascii_pos).ok_or_else(|| fmt_err("unexpected end of PLY data"))?;
            ascii_pos += 1;
            tok.parse::<f64>().map_err(|_| fmt_err(format!("bad PLY value {tok}")))
        } else {
            read_scalar_bin(r, t, enc)
        }
    };
    for el in &elements {
        let xyz: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|n| el.props.iter().position(|p| matches!(p, Property::Scalar(pn, _) if pn == n)))
            .collect();
        for _ in 0..el.count {
            let mut coords = [0.0; 3];
            for (pi, p) in el.props.iter().enumerate() {
                match p {
                    Property::Scalar(_, t) => {
                        let v = next(*t, &mut r)?;
                        if let Some(k) = xyz.iter().position(|&q| q == Some(pi)) {
                            coords[k] = v;
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = next(*ct, &mut r)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(next(*it, &mut r)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            faces.push(items.into_iter().map(|v| v as usize).collect());
                        }
                    }
                }
            }
            if el.name == "vertex" {
                if xyz.iter().any(Option::is_none) {
                    return Err(fmt_err("PLY vertex element lacks x/y/z"));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    Ok(PlyData { vertices, faces })
}

/// Reads a triangle mesh from PLY; polygons other than triangles are rejected.
pub fn read_ply<R: BufRead>(r: R) -> Result<TriMesh, GeometryError> {
    let data = parse_ply(r)?;
    let faces = data
        .faces
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            <[usize; 3]>::try_from(f.as_slice())
                .map_err(|_| fmt_err(format!("face {i} has {} vertices; only triangles are accepted", f.len())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    TriMesh::new(data.vertices, faces)
}

/// Reads only the vertex positions of a PLY file (faces and colours ignored).
pub fn read_ply_points<R: BufRead>(r: R) -> Result<Vec<Vec3>, GeometryError> {
    Ok(parse_ply(r)?.vertices)
}

/// One `x y z` triple per line; blank lines and `#` comments skipped, extra
/// columns (colours) ignored.
pub fn read_xyz<R: BufRead>(r: R) -> Result<Vec<Vec3>, GeometryError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let c: Vec<f64> = t
            .split_whitespace()
            .take(3)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| fmt_err(format!("line {}: {e}", lineno + 1)))?;
        if c.len() < 3 {
            return Err(fmt_err(format!("line {}: expected x y z", lineno + 1)));
        }
        out.push(Vec3::new(c[0], c[1], c[2]));
    }
    Ok(out)
}

pub fn write_xyz<W: Write>(mut w: W, points: &[Vec3]) -> Result<(), GeometryError> {
    for p in points {
        writeln!(w, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
    }
    Ok(())
}
