//! Little-endian binary encoding shared by the dataset and model files.
//!
//! Every file is `magic (4 bytes) | version (u32) | body | crc32(u32)` where
//! the checksum covers everything before it.

use crate::error::{Error, Result};
use crate::fbg::SensorLayout;
use crate::geometry::WorkspaceConfig;

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    /// Appends the checksum and returns the finished file.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and checksum, and positions the reader on the body.
    pub fn open(data: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Self> {
        if data.len() < 12 {
            return Err(Error::Corrupt(format!("file too short ({} bytes)", data.len())));
        }
        if &data[..4] != magic {
            return Err(Error::Corrupt("bad magic".into()));
        }
        let found = u32::from_le_bytes(data[4..8].try_into().unwrap());
        let (body, tail) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if found != version {
            return Err(Error::Version {
                found,
                expected: version,
            });
        }
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        Ok(Self { buf: body, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt(format!(
                "unexpected end of data at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Corrupt(format!("array length {n} exceeds remaining data")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after body",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn header(magic: &[u8; 4], version: u32) -> Writer {
    let mut w = Writer::new();
    w.bytes(magic);
    w.u32(version);
    w
}

pub(crate) fn write_layout(w: &mut Writer, l: &SensorLayout) {
    w.u64(l.node_count as u64);
    w.f64(l.sample_spacing);
    w.f64s(&l.helix_radii);
    w.f64(l.helix_pitch);
    w.f64(l.base_azimuth);
    w.f64s(&l.wavelengths);
    w.f64(l.strain_coefficient);
    w.f64(l.shear_coefficient);
    w.f64s(&l.strain_bias);
    w.f64(l.tube_outer_diameter);
    w.u64(l.physical_fbg_count as u64);
    w.f64(l.fiber_length);
}

pub(crate) fn read_layout(r: &mut Reader) -> Result<SensorLayout> {
    Ok(SensorLayout {
        node_count: r.usize()?,
        sample_spacing: r.f64()?,
        helix_radii: r.f64s()?,
        helix_pitch: r.f64()?,
        base_azimuth: r.f64()?,
        wavelengths: r.f64s()?,
        strain_coefficient: r.f64()?,
        shear_coefficient: r.f64()?,
        strain_bias: r.f64s()?,
        tube_outer_diameter: r.f64()?,
        physical_fbg_count: r.usize()?,
        fiber_length: r.f64()?,
    })
}

pub(crate) fn write_workspace(w: &mut Writer, ws: &WorkspaceConfig) {
    w.f64(ws.max_curvature);
    w.f64(ws.bend_angle_range);
    w.f64(ws.min_bend_radius);
    w.f64(ws.rod_length);
    w.f64(ws.endoscope_outer_diameter);
    w.f64(ws.force_range.0);
    w.f64(ws.force_range.1);
    w.f64(ws.contact_span);
}

pub(crate) fn read_workspace(r: &mut Reader) -> Result<WorkspaceConfig> {
    Ok(WorkspaceConfig {
        max_curvature: r.f64()?,
        bend_angle_range: r.f64()?,
        min_bend_radius: r.f64()?,
        rod_length: r.f64()?,
        endoscope_outer_diameter: r.f64()?,
        force_range: (r.f64()?, r.f64()?),
        contact_span: r.f64()?,
    })
}
