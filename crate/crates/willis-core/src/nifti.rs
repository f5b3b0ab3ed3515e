//! Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//!
//! Scope is deliberately narrow: little-endian, 3D, float32 or uint8 data,
//! axis-aligned geometry. Spacing comes from pixdim[1..3], the origin from
//! the sform translation column (qoffset as fallback). Rotational metadata
//! is ignored with a warning since every volume this crate produces is
//! axis-aligned. Written float32 data round-trips bit-exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array3, ShapeBuilder};

use crate::error::{Error, Result};
use crate::volume::Volume3D;

const HDR_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_FLOAT32: i16 = 16;

fn put_i16(buf: &mut [u8], off: usize, v: i16) {
    buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_i32(buf: &mut [u8], off: usize, v: i32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], off: usize, v: f32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i16(buf: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([buf[off], buf[off + 1]])
}

fn get_i32(buf: &[u8], off: usize) -> i32 {
    i32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn get_f32(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn is_gz(path: &Path) -> bool {
    path.extension().map_or(false, |e| e.eq_ignore_ascii_case("gz"))
}

fn build_header(dims: [usize; 3], spacing: [f32; 3], origin: [f32; 3], datatype: i16) -> [u8; VOX_OFFSET] {
    let mut h = [0u8; VOX_OFFSET];
    put_i32(&mut h, 0, HDR_SIZE as i32);
    // dim[8]
    put_i16(&mut h, 40, 3);
    for a in 0..3 {
        put_i16(&mut h, 42 + 2 * a, dims[a] as i16);
    }
    for a in 4..8 {
        put_i16(&mut h, 40 + 2 * a, 1);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, if datatype == DT_FLOAT32 { 32 } else { 8 });
    // pixdim: qfac then spacing
    put_f32(&mut h, 76, 1.0);
    for a in 0..3 {
        put_f32(&mut h, 80 + 4 * a, spacing[a]);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32); // vox_offset
    put_f32(&mut h, 112, 1.0); // scl_slope
    h[123] = 2; // xyzt_units: mm
    put_i16(&mut h, 254, 1); // sform_code
    for a in 0..3 {
        put_f32(&mut h, 268 + 4 * a, origin[a]); // qoffset as well, harmless
    }
    // srow_{x,y,z}: diagonal spacing, translation = origin
    for a in 0..3 {
        let row = 280 + 16 * a;
        put_f32(&mut h, row + 4 * a, spacing[a]);
        put_f32(&mut h, row + 12, origin[a]);
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

struct ParsedHeader {
    dims: [usize; 3],
    spacing: [f32; 3],
    origin: [f32; 3],
    datatype: i16,
    scl_slope: f32,
    scl_inter: f32,
}

fn parse_header(h: &[u8], path: &Path) -> Result<ParsedHeader> {
    if h.len() < HDR_SIZE {
        return Err(Error::data(format!("{}: truncated NIfTI header", path.display())));
    }
    let sizeof_hdr = get_i32(h, 0);
    if sizeof_hdr != HDR_SIZE as i32 {
        if sizeof_hdr.swap_bytes() == HDR_SIZE as i32 {
            return Err(Error::data(format!(
                "{}: big-endian NIfTI is unsupported",
                path.display()
            )));
        }
        return Err(Error::data(format!(
            "{}: malformed NIfTI header (sizeof_hdr={sizeof_hdr})",
            path.display()
        )));
    }
    match &h[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::data(format!(
                "{}: two-file NIfTI (.hdr/.img) is unsupported",
                path.display()
            )))
        }
        _ => return Err(Error::data(format!("{}: bad NIfTI magic", path.display()))),
    }
    let ndim = get_i16(h, 40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::data(format!("{}: malformed dim[0]={ndim}", path.display())));
    }
    let mut dims = [1usize; 3];
    for a in 0..3 {
        let d = if (a as i16) < ndim { get_i16(h, 42 + 2 * a) } else { 1 };
        if d < 1 {
            return Err(Error::data(format!("{}: malformed dim[{}]={d}", path.display(), a + 1)));
        }
        dims[a] = d as usize;
    }
    for a in 3..ndim as usize {
        let d = get_i16(h, 42 + 2 * a);
        if d > 1 {
            return Err(Error::data(format!(
                "{}: {}-dimensional data is unsupported",
                path.display(),
                ndim
            )));
        }
    }
    let datatype = get_i16(h, 70);
    if datatype != DT_FLOAT32 && datatype != DT_UINT8 {
        return Err(Error::data(format!(
            "{}: unsupported NIfTI datatype {datatype} (expected float32 or uint8)",
            path.display()
        )));
    }
    let mut spacing = [0.0f32; 3];
    for a in 0..3 {
        spacing[a] = get_f32(h, 80 + 4 * a);
    }
    if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::data(format!(
            "{}: nonpositive voxel spacing {spacing:?}",
            path.display()
        )));
    }

    let sform_code = get_i16(h, 254);
    let qform_code = get_i16(h, 252);
    let mut origin = [0.0f32; 3];
    if sform_code > 0 {
        let mut oblique = false;
        for a in 0..3 {
            let row = 280 + 16 * a;
            origin[a] = get_f32(h, row + 12);
            for c in 0..3 {
                let v = get_f32(h, row + 4 * c);
                if c == a {
                    if (v - spacing[a]).abs() > 1e-3 * spacing[a].max(1e-6) {
                        oblique = true;
                    }
                } else if v.abs() > 1e-6 {
                    oblique = true;
                }
            }
        }
        if oblique {
            log::warn!(
                "{}: non-axis-aligned sform; orientation metadata ignored, keeping pixdim spacing",
                path.display()
            );
        }
    } else {
        if qform_code > 0 {
            let quat: Vec<f32> = (0..3).map(|a| get_f32(h, 256 + 4 * a)).collect();
            if quat.iter().any(|q| q.abs() > 1e-6) {
                log::warn!(
                    "{}: rotational qform; orientation metadata ignored",
                    path.display()
                );
            }
        }
        for a in 0..3 {
            origin[a] = get_f32(h, 268 + 4 * a);
        }
    }

    Ok(ParsedHeader {
        dims,
        spacing,
        origin,
        datatype,
        scl_slope: get_f32(h, 112),
        scl_inter: get_f32(h, 116),
    })
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let f = File::open(path).map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(f)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::data(format!("{}: gzip: {e}", path.display())))?;
    } else {
        let mut f = f;
        f.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let f = File::create(path)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", path.display())))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(f, Compression::fast());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        let mut f = f;
        f.write_all(bytes)?;
    }
    Ok(())
}

fn decode_payload(raw: &[u8], hdr: &ParsedHeader, path: &Path) -> Result<Vec<f32>> {
    let n = hdr.dims[0] * hdr.dims[1] * hdr.dims[2];
    let vox_offset = VOX_OFFSET.min(raw.len());
    let body = &raw[vox_offset..];
    let elem = if hdr.datatype == DT_FLOAT32 { 4 } else { 1 };
    if body.len() < n * elem {
        return Err(Error::data(format!(
            "{}: truncated data ({} bytes for {} voxels)",
            path.display(),
            body.len(),
            n
        )));
    }
    let mut vals = Vec::with_capacity(n);
    if hdr.datatype == DT_FLOAT32 {
        for c in body[..n * 4].chunks_exact(4) {
            vals.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        }
    } else {
        vals.extend(body[..n].iter().map(|&b| b as f32));
    }
    let rescale = hdr.scl_slope != 0.0 && (hdr.scl_slope != 1.0 || hdr.scl_inter != 0.0);
    if rescale {
        for v in &mut vals {
            *v = *v * hdr.scl_slope + hdr.scl_inter;
        }
    }
    Ok(vals)
}

/// NIfTI data runs x-fastest; rebuild as a standard-layout (x, y, z) array.
fn to_array(vals: Vec<f32>, dims: [usize; 3]) -> Result<Array3<f32>> {
    let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]).f(), vals)
        .map_err(|e| Error::data(format!("shape: {e}")))?;
    Ok(arr.as_standard_layout().into_owned())
}

pub fn read_volume(path: &Path) -> Result<Volume3D> {
    let raw = read_all(path)?;
    let hdr = parse_header(&raw, path)?;
    let vals = decode_payload(&raw, &hdr, path)?;
    Volume3D::new(to_array(vals, hdr.dims)?, hdr.spacing, hdr.origin)
}

pub fn write_volume(path: &Path, v: &Volume3D) -> Result<()> {
    let dims = v.dims();
    let mut bytes = build_header(dims, v.spacing(), v.origin(), DT_FLOAT32).to_vec();
    bytes.reserve(dims[0] * dims[1] * dims[2] * 4);
    // x-fastest traversal
    for &x in v.data().t().iter() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    write_all(path, &bytes)
}

/// Binary masks are stored as uint8 volumes with the same geometry handling.
pub fn write_mask(path: &Path, mask: &Array3<u8>, spacing: [f32; 3], origin: [f32; 3]) -> Result<()> {
    let s = mask.shape();
    let dims = [s[0], s[1], s[2]];
    let mut bytes = build_header(dims, spacing, origin, DT_UINT8).to_vec();
    bytes.extend(mask.t().iter());
    write_all(path, &bytes)
}

pub fn read_mask(path: &Path) -> Result<Array3<u8>> {
    let raw = read_all(path)?;
    let hdr = parse_header(&raw, path)?;
    let vals = decode_payload(&raw, &hdr, path)?;
    let arr = to_array(vals, hdr.dims)?;
    Ok(arr.mapv(|v| if v != 0.0 { 1u8 } else { 0u8 }))
}
