//! Binary field snapshots.
//!
//! Layout, little endian throughout: the 7-byte magic `NSCHF1\0`, then `nx`,
//! `ny` and the field count as `u32`. Each field is a kind byte (0 cell,
//! 1 x-face, 2 y-face), a 16-byte NUL-padded ASCII name, the `f64` values and
//! a CRC32 of the kind, name and value bytes.

use std::path::Path;

use crate::error::{NschError, Result};
use crate::flow::FlowState;
use crate::grid::{FaceField, Grid, ScalarField};
use crate::phasefield::PhaseState;

pub const MAGIC: &[u8; 7] = b"NSCHF1\0";
const FAMILY: &[u8] = b"NSCHF";
const NAME_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Cell = 0,
    XFace = 1,
    YFace = 2,
}

impl FieldKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(FieldKind::Cell),
            1 => Some(FieldKind::XFace),
            2 => Some(FieldKind::YFace),
            _ => None,
        }
    }

    pub fn len(self, nx: usize, ny: usize) -> usize {
        match self {
            FieldKind::Cell => nx * ny,
            FieldKind::XFace => (nx + 1) * ny,
            FieldKind::YFace => nx * (ny + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedField {
    pub name: String,
    pub kind: FieldKind,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub nx: usize,
    pub ny: usize,
    pub fields: Vec<NamedField>,
}

impl SnapshotFile {
    pub fn field(&self, name: &str) -> Option<&NamedField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

fn field_crc(kind: u8, name: &[u8; NAME_LEN], data: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&[kind]);
    h.update(name);
    h.update(data);
    h.finalize()
}

fn padded_name(name: &str) -> Result<[u8; NAME_LEN]> {
    if !name.is_ascii() || name.is_empty() || name.len() > NAME_LEN || name.contains('\0') {
        return Err(NschError::CorruptSnapshot(format!("invalid field name {name:?}")));
    }
    let mut out = [0u8; NAME_LEN];
    out[..name.len()].copy_from_slice(name.as_bytes());
    Ok(out)
}

pub fn encode(s: &SnapshotFile) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for n in [s.nx, s.ny, s.fields.len()] {
        let n = u32::try_from(n).map_err(|_| NschError::CorruptSnapshot(format!("dimension {n} does not fit in u32")))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    for f in &s.fields {
        if f.data.len() != f.kind.len(s.nx, s.ny) {
            return Err(NschError::CorruptSnapshot(format!("field {} has {} values", f.name, f.data.len())));
        }
        let name = padded_name(&f.name)?;
        let data: Vec<u8> = f.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        out.push(f.kind as u8);
        out.extend_from_slice(&name);
        out.extend_from_slice(&data);
        out.extend_from_slice(&field_crc(f.kind as u8, &name, &data).to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| NschError::CorruptSnapshot(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SnapshotFile> {
    if bytes.len() < MAGIC.len() {
        return Err(NschError::CorruptSnapshot("truncated header".into()));
    }
    let magic = &bytes[..MAGIC.len()];
    if magic != MAGIC {
        if magic.starts_with(FAMILY) {
            return Err(NschError::FormatVersionMismatch(magic.to_vec()));
        }
        return Err(NschError::CorruptSnapshot("bad magic".into()));
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let count = r.u32("field count")? as usize;
    let mut fields = Vec::with_capacity(count.min(64));
    for k in 0..count {
        let kind_byte = r.take(1, "field kind")?[0];
        let kind = FieldKind::from_byte(kind_byte).ok_or_else(|| NschError::CorruptSnapshot(format!("field {k} has unknown kind {kind_byte}")))?;
        let name: [u8; NAME_LEN] = r.take(NAME_LEN, "field name")?.try_into().expect("name length");
        let len = kind.len(nx, ny);
        let nbytes = len.checked_mul(8).ok_or_else(|| NschError::CorruptSnapshot("field size overflows".into()))?;
        let data = r.take(nbytes, "field data")?;
        let crc = r.u32("checksum")?;
        if crc != field_crc(kind_byte, &name, data) {
            return Err(NschError::CorruptSnapshot(format!("checksum mismatch in field {k}")));
        }
        let end = name.iter().position(|b| *b == 0).unwrap_or(NAME_LEN);
        let name = std::str::from_utf8(&name[..end])
            .ok()
            .filter(|n| n.is_ascii() && !n.is_empty())
            .ok_or_else(|| NschError::CorruptSnapshot(format!("field {k} has an invalid name")))?
            .to_string();
        let data = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        fields.push(NamedField { name, kind, data });
    }
    if r.pos != bytes.len() {
        return Err(NschError::CorruptSnapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(SnapshotFile { nx, ny, fields })
}

pub fn write_file(path: &Path, s: &SnapshotFile) -> Result<()> {
    Ok(super::write_atomic(path, &encode(s)?)?)
}

pub fn read_file(path: &Path) -> Result<SnapshotFile> {
    decode(&std::fs::read(path)?)
}

fn cell(name: &str, f: &ScalarField) -> NamedField {
    NamedField { name: name.into(), kind: FieldKind::Cell, data: f.data.clone() }
}

fn faces(prefix: &str, f: &FaceField) -> [NamedField; 2] {
    [
        NamedField { name: format!("{prefix}x"), kind: FieldKind::XFace, data: f.x.clone() },
        NamedField { name: format!("{prefix}y"), kind: FieldKind::YFace, data: f.y.clone() },
    ]
}

/// Packs the full coupled state.
pub fn from_states(phase: &PhaseState, flow: &FlowState) -> SnapshotFile {
    let g = phase.grid();
    let mut fields = vec![cell("phi", &phase.phi), cell("mu", &phase.mu), cell("g", &flow.g), cell("rho", &flow.rho)];
    fields.extend(faces("v", &flow.v));
    fields.extend(faces("J", &phase.j));
    fields.extend(faces("Jhat", &phase.jhat));
    SnapshotFile { nx: g.nx, ny: g.ny, fields }
}

/// Unpacks a state written by [`from_states`] on grid `g` at time `t`.
pub fn to_states(s: &SnapshotFile, g: Grid, t: f64) -> Result<(PhaseState, FlowState)> {
    if s.nx != g.nx || s.ny != g.ny {
        return Err(NschError::MismatchedGrids(format!("snapshot is {} x {}, grid is {} x {}", s.nx, s.ny, g.nx, g.ny)));
    }
    let get = |name: &str, kind: FieldKind| -> Result<Vec<f64>> {
        let f = s.field(name).ok_or_else(|| NschError::CorruptSnapshot(format!("missing field {name}")))?;
        if f.kind != kind {
            return Err(NschError::CorruptSnapshot(format!("field {name} has kind {:?}", f.kind)));
        }
        Ok(f.data.clone())
    };
    let scalar = |name: &str| -> Result<ScalarField> { Ok(ScalarField { grid: g, data: get(name, FieldKind::Cell)? }) };
    let face = |p: &str| -> Result<FaceField> {
        Ok(FaceField { grid: g, x: get(&format!("{p}x"), FieldKind::XFace)?, y: get(&format!("{p}y"), FieldKind::YFace)? })
    };
    let phase = PhaseState { phi: scalar("phi")?, mu: scalar("mu")?, j: face("J")?, jhat: face("Jhat")?, t };
    let flow = FlowState { v: face("v")?, g: scalar("g")?, rho: scalar("rho")?, t };
    Ok((phase, flow))
}
