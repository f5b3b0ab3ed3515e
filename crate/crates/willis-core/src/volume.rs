//! 3D scalar volumes with physical geometry, plus the coordinate transforms,
//! cropping and resampling every other module builds on.
//!
//! Conventions: axis order is (x, y, z) everywhere, world units are mm,
//! continuous voxel coordinates sit at voxel centers, and the world frame is
//! axis-aligned (no rotation part). Boxes and crop windows are half-open.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in world coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldPoint(pub [f64; 3]);

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        WorldPoint([x, y, z])
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        let d = [
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// An integer voxel index. May be out of bounds; operations that need
/// in-bounds indices state so.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoxelIndex(pub [i64; 3]);

impl VoxelIndex {
    pub fn new(i: i64, j: i64, k: i64) -> Self {
        VoxelIndex([i, j, k])
    }
}

/// A 3D scalar image with voxel spacing (mm/voxel) and world origin (mm,
/// world position of voxel (0,0,0)). Immutable after construction.
#[derive(Debug, Clone)]
pub struct Volume3D {
    data: Array3<f32>,
    spacing: [f32; 3],
    origin: [f32; 3],
}

impl Volume3D {
    pub fn new(data: Array3<f32>, spacing: [f32; 3], origin: [f32; 3]) -> Result<Self> {
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::data(format!("nonpositive voxel spacing {spacing:?}")));
        }
        if data.shape().iter().any(|&d| d < 1) {
            return Err(Error::data(format!("empty volume dims {:?}", data.shape())));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::data(format!("non-finite origin {origin:?}")));
        }
        Ok(Volume3D { data, spacing, origin })
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f32; 3] {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn in_bounds(&self, idx: VoxelIndex) -> bool {
        let d = self.dims();
        (0..3).all(|a| idx.0[a] >= 0 && (idx.0[a] as usize) < d[a])
    }

    /// World point to continuous voxel coordinates: (p - origin) / spacing.
    pub fn world_to_voxel(&self, p: WorldPoint) -> [f64; 3] {
        let mut v = [0.0; 3];
        for a in 0..3 {
            v[a] = (p.0[a] - self.origin[a] as f64) / self.spacing[a] as f64;
        }
        v
    }

    /// World position of a voxel index: origin + idx * spacing.
    pub fn voxel_to_world(&self, idx: VoxelIndex) -> WorldPoint {
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = self.origin[a] as f64 + idx.0[a] as f64 * self.spacing[a] as f64;
        }
        WorldPoint(p)
    }

    /// Nearest voxel to a world point (round half up per axis).
    pub fn nearest_voxel(&self, p: WorldPoint) -> VoxelIndex {
        let v = self.world_to_voxel(p);
        VoxelIndex([
            v[0].round() as i64,
            v[1].round() as i64,
            v[2].round() as i64,
        ])
    }

    /// Crop a cubic `side`^3 patch whose window is [center - side/2,
    /// center - side/2 + side). Windows that stick out of the volume are
    /// translated back inside, never zero-padded; `offset` is the window's
    /// minimum corner, so patch index q maps to volume index offset + q.
    pub fn crop_patch(&self, center: VoxelIndex, side: usize) -> Result<(Volume3D, VoxelIndex)> {
        let dims = self.dims();
        if side < 1 {
            return Err(Error::data("crop side must be >= 1".to_string()));
        }
        if dims.iter().any(|&d| d < side) {
            return Err(Error::data(format!(
                "volume dims {dims:?} smaller than crop side {side}"
            )));
        }
        if !self.in_bounds(center) {
            return Err(Error::data(format!(
                "crop center {:?} outside volume dims {dims:?}",
                center.0
            )));
        }
        let half = (side / 2) as i64;
        let mut lo = [0i64; 3];
        for a in 0..3 {
            lo[a] = (center.0[a] - half).clamp(0, dims[a] as i64 - side as i64);
        }
        let patch = self.data.slice(ndarray::s![
            lo[0] as usize..lo[0] as usize + side,
            lo[1] as usize..lo[1] as usize + side,
            lo[2] as usize..lo[2] as usize + side
        ]);
        let offset = VoxelIndex(lo);
        let origin_w = self.voxel_to_world(offset);
        let patch = Volume3D::new(
            patch.to_owned(),
            self.spacing,
            [origin_w.0[0] as f32, origin_w.0[1] as f32, origin_w.0[2] as f32],
        )?;
        Ok((patch, offset))
    }

    /// Trilinear sample at a continuous voxel coordinate, clamped at borders.
    pub fn sample_trilinear(&self, v: [f64; 3]) -> f32 {
        let dims = self.dims();
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut fr = [0.0f64; 3];
        for a in 0..3 {
            let c = v[a].clamp(0.0, (dims[a] - 1) as f64);
            let f = c.floor();
            i0[a] = f as usize;
            i1[a] = (i0[a] + 1).min(dims[a] - 1);
            fr[a] = c - f;
        }
        let d = &self.data;
        let mut acc = 0.0f64;
        for (bx, wx) in [(i0[0], 1.0 - fr[0]), (i1[0], fr[0])] {
            for (by, wy) in [(i0[1], 1.0 - fr[1]), (i1[1], fr[1])] {
                for (bz, wz) in [(i0[2], 1.0 - fr[2]), (i1[2], fr[2])] {
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        acc += w * d[[bx, by, bz]] as f64;
                    }
                }
            }
        }
        acc as f32
    }

    /// Resample onto a new voxel grid by trilinear interpolation. The output
    /// grid shares the world origin; output dims are ceil(dims * spacing /
    /// target) per axis.
    pub fn resample(&self, target_spacing: [f32; 3]) -> Result<Volume3D> {
        if target_spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::data(format!(
                "nonpositive target spacing {target_spacing:?}"
            )));
        }
        let dims = self.dims();
        let mut out_dims = [0usize; 3];
        for a in 0..3 {
            let extent = dims[a] as f64 * self.spacing[a] as f64;
            out_dims[a] = (extent / target_spacing[a] as f64).ceil() as usize;
            out_dims[a] = out_dims[a].max(1);
        }
        let mut out = Array3::<f32>::zeros(out_dims);
        for i in 0..out_dims[0] {
            let vx = i as f64 * target_spacing[0] as f64 / self.spacing[0] as f64;
            for j in 0..out_dims[1] {
                let vy = j as f64 * target_spacing[1] as f64 / self.spacing[1] as f64;
                for k in 0..out_dims[2] {
                    let vz = k as f64 * target_spacing[2] as f64 / self.spacing[2] as f64;
                    out[[i, j, k]] = self.sample_trilinear([vx, vy, vz]);
                }
            }
        }
        Volume3D::new(out, target_spacing, self.origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vol(dims: [usize; 3], spacing: [f32; 3], origin: [f32; 3]) -> Volume3D {
        Volume3D::new(Array3::zeros(dims), spacing, origin).unwrap()
    }

    #[test]
    fn world_to_voxel_arithmetic() {
        let v = vol([32, 32, 32], [0.4, 0.4, 0.4], [0.0, 0.0, 0.0]);
        let c = v.world_to_voxel(WorldPoint::new(4.0, 0.0, 0.0));
        // spacing is stored as f32, so decimal examples hold to f32 precision
        assert_abs_diff_eq!(c[0], 10.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c[1], 0.0);
        assert_abs_diff_eq!(c[2], 0.0);

        // p = origin
        let c = v.world_to_voxel(WorldPoint::new(0.0, 0.0, 0.0));
        assert_eq!(c, [0.0, 0.0, 0.0]);

        let v = vol([32, 32, 32], [0.5, 0.5, 0.8], [1.0, 2.0, 3.0]);
        let c = v.world_to_voxel(WorldPoint::new(2.0, 2.0, 4.6));
        assert_abs_diff_eq!(c[0], 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c[2], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn voxel_to_world_and_roundtrip() {
        let v = vol([64, 64, 64], [0.4, 0.4, 0.4], [0.0, 0.0, 0.0]);
        assert_eq!(v.voxel_to_world(VoxelIndex::new(0, 0, 0)).0, [0.0; 3]);
        let p = v.voxel_to_world(VoxelIndex::new(16, 16, 16));
        assert_abs_diff_eq!(p.0[0], 6.4, epsilon = 1e-5);
        assert_abs_diff_eq!(p.0[1], 6.4, epsilon = 1e-5);
        assert_abs_diff_eq!(p.0[2], 6.4, epsilon = 1e-5);

        // exact inverse on grid points, including an awkward spacing
        let v = vol([64, 64, 64], [0.3, 0.7, 1.1], [5.5, -2.25, 0.125]);
        for idx in [[0, 0, 0], [1, 2, 3], [63, 63, 63], [17, 40, 9]] {
            let idx = VoxelIndex(idx.map(|c| c as i64));
            let back = v.world_to_voxel(v.voxel_to_world(idx));
            for a in 0..3 {
                assert_eq!(back[a], idx.0[a] as f64, "axis {a} of {idx:?}");
            }
        }
    }

    #[test]
    fn crop_patch_centered_and_clamped() {
        let v = vol([128, 128, 128], [0.4; 3], [0.0; 3]);
        let (p, off) = v.crop_patch(VoxelIndex::new(64, 64, 64), 32).unwrap();
        assert_eq!(off, VoxelIndex::new(48, 48, 48));
        assert_eq!(p.dims(), [32, 32, 32]);

        let (_, off) = v.crop_patch(VoxelIndex::new(5, 64, 64), 32).unwrap();
        assert_eq!(off, VoxelIndex::new(0, 48, 48));

        let (_, off) = v.crop_patch(VoxelIndex::new(127, 64, 64), 32).unwrap();
        assert_eq!(off, VoxelIndex::new(96, 48, 48));

        let small = vol([16, 16, 16], [0.4; 3], [0.0; 3]);
        assert!(small.crop_patch(VoxelIndex::new(8, 8, 8), 32).is_err());
    }

    #[test]
    fn crop_patch_maps_indices_through_offset() {
        let mut data = Array3::zeros([40, 40, 40]);
        data[[20, 21, 22]] = 7.0;
        let v = Volume3D::new(data, [0.4; 3], [0.0; 3]).unwrap();
        let (p, off) = v.crop_patch(VoxelIndex::new(20, 21, 22), 8).unwrap();
        let q = [
            (20 - off.0[0]) as usize,
            (21 - off.0[1]) as usize,
            (22 - off.0[2]) as usize,
        ];
        assert_eq!(p.data()[q], 7.0);
    }

    #[test]
    fn resample_identity_and_dims() {
        let mut data = Array3::zeros([10, 10, 10]);
        for ((i, j, k), v) in data.indexed_iter_mut() {
            *v = (i * 100 + j * 10 + k) as f32;
        }
        let v = Volume3D::new(data, [0.5, 0.5, 0.8], [0.0; 3]).unwrap();

        let same = v.resample([0.5, 0.5, 0.8]).unwrap();
        assert_eq!(same.dims(), [10, 10, 10]);
        for (a, b) in v.data().iter().zip(same.data().iter()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }

        let v = vol([100, 100, 50], [0.5, 0.5, 0.8], [0.0; 3]);
        let r = v.resample([0.4, 0.4, 0.4]).unwrap();
        assert_eq!(r.dims(), [125, 125, 100]);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let v = Volume3D::new(Array3::from_elem([12, 9, 7], 3.25), [0.5, 0.5, 0.8], [0.0; 3])
            .unwrap();
        let r = v.resample([0.4, 0.4, 0.4]).unwrap();
        for &x in r.data().iter() {
            assert_abs_diff_eq!(x, 3.25, epsilon = 1e-6);
        }
    }

    #[test]
    fn invalid_construction() {
        assert!(Volume3D::new(Array3::zeros([4, 4, 4]), [0.0, 0.4, 0.4], [0.0; 3]).is_err());
        assert!(Volume3D::new(Array3::zeros([4, 4, 4]), [-0.4, 0.4, 0.4], [0.0; 3]).is_err());
    }
}
