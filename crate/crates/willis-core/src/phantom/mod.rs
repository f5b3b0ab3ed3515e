//! Synthetic TOF-like vascular phantoms of a stylized Circle of Willis.
//!
//! Phantoms are the dataset substitute used throughout: a template vessel
//! graph with 13 labeled bifurcations is jittered by a smooth random
//! deformation, pruned for anatomically absent landmarks, rasterized as
//! bright tubes over a dark background, optionally decorated with aneurysm
//! spheres, and finished with additive Gaussian noise. Exact junction
//! coordinates are recorded as ground truth.

mod template;

pub use template::{CowTemplate, NodeId, TemplateNode};

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{write_landmarks, LandmarkLabel, LandmarkSet};
use crate::nifti;
use crate::seed::derive_seed;
use crate::volume::{Volume3D, WorldPoint};

/// Landmarks are authored at least this many voxels away from every face, so
/// 32-voxel boxes around ground truth never need clamping.
const LANDMARK_MARGIN_VOX: f64 = 20.0;
/// Deformation amplitude cap in voxels keeps the 16-voxel margin guarantee.
const MAX_JITTER_VOX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AneurysmSpec {
    pub label: LandmarkLabel,
    pub volume_mm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub present_landmarks: BTreeSet<LandmarkLabel>,
    /// Tube radius range in mm; each vessel segment draws one radius.
    pub vessel_radius_range: [f64; 2],
    /// Amplitude (mm) of the smooth random deformation of the template.
    pub jitter_scale: f64,
    pub noise_sigma: f64,
    pub vessel_intensity: f64,
    pub background_intensity: f64,
    pub aneurysms: Vec<AneurysmSpec>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [128, 128, 128],
            spacing: [0.4, 0.4, 0.4],
            present_landmarks: LandmarkLabel::ALL.iter().copied().collect(),
            vessel_radius_range: [0.8, 1.6],
            jitter_scale: 1.2,
            noise_sigma: 6.0,
            vessel_intensity: 100.0,
            background_intensity: 20.0,
            aneurysms: Vec::new(),
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.present_landmarks.is_empty() {
            return Err(Error::config("present_landmarks must be nonempty"));
        }
        if self.dims.iter().any(|&d| d < 64) {
            return Err(Error::config(format!(
                "phantom dims {:?} too small; template margins need >= 64 voxels per axis",
                self.dims
            )));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config(format!("nonpositive spacing {:?}", self.spacing)));
        }
        let [rmin, rmax] = self.vessel_radius_range;
        if !(rmin > 0.0) || rmax < rmin {
            return Err(Error::config(format!(
                "bad vessel radius range {:?}",
                self.vessel_radius_range
            )));
        }
        let min_extent = (0..3)
            .map(|a| self.dims[a] as f64 * self.spacing[a] as f64)
            .fold(f64::INFINITY, f64::min);
        if rmax > min_extent / 8.0 {
            return Err(Error::config(format!(
                "vessel radius {rmax} mm too large for volume extent {min_extent} mm"
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::config("noise_sigma must be >= 0"));
        }
        if !(self.vessel_intensity > self.background_intensity) {
            return Err(Error::config(
                "vessel_intensity must exceed background_intensity",
            ));
        }
        if self.jitter_scale < 0.0 {
            return Err(Error::config("jitter_scale must be >= 0"));
        }
        let min_spacing = self.spacing.iter().fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
        if self.jitter_scale / min_spacing > MAX_JITTER_VOX {
            return Err(Error::config(format!(
                "jitter_scale {} mm exceeds {} voxels; margin guarantee would break",
                self.jitter_scale, MAX_JITTER_VOX
            )));
        }
        for an in &self.aneurysms {
            if !(2.0..=1050.0).contains(&an.volume_mm3) {
                return Err(Error::config(format!(
                    "aneurysm volume {} mm^3 outside [2, 1050]",
                    an.volume_mm3
                )));
            }
            if !self.present_landmarks.contains(&an.label) {
                return Err(Error::config(format!(
                    "aneurysm requested at absent landmark {}",
                    an.label
                )));
            }
        }
        Ok(())
    }
}

/// A generated phantom: the volume, its ground truth, the clean vessel mask
/// and the exact spec (including seed) that produced it.
#[derive(Debug, Clone)]
pub struct PhantomSample {
    pub volume: Volume3D,
    pub landmarks: LandmarkSet,
    pub vessel_mask: Array3<u8>,
    pub manifest: PhantomSpec,
}

/// Smooth low-frequency displacement field: three sinusoidal plane waves per
/// axis whose absolute amplitudes sum to `jitter_scale` mm.
struct JitterField {
    dirs: [[f64; 3]; 3],
    freqs: [f64; 3],
    amps: [[f64; 3]; 3],   // [axis][component]
    phases: [[f64; 3]; 3], // [axis][component]
}

impl JitterField {
    fn draw(rng: &mut ChaCha8Rng, scale: f64) -> JitterField {
        let mut dirs = [[0.0; 3]; 3];
        let mut freqs = [0.0; 3];
        let mut amps = [[0.0; 3]; 3];
        let mut phases = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut d = [0.0; 3];
            loop {
                for c in &mut d {
                    *c = rng.random::<f64>() * 2.0 - 1.0;
                }
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if n > 1e-3 {
                    for c in &mut d {
                        *c /= n;
                    }
                    break;
                }
            }
            dirs[k] = d;
            freqs[k] = 0.8 + rng.random::<f64>() * 1.7;
        }
        for axis in 0..3 {
            let mut raw = [0.0; 3];
            let mut sum = 0.0;
            for k in 0..3 {
                raw[k] = rng.random::<f64>() * 2.0 - 1.0;
                sum += raw[k].abs();
            }
            for k in 0..3 {
                amps[axis][k] = if sum > 0.0 { scale * raw[k] / sum } else { 0.0 };
                phases[axis][k] = rng.random::<f64>() * std::f64::consts::TAU;
            }
        }
        JitterField { dirs, freqs, amps, phases }
    }

    /// Displacement in mm at a template-unit coordinate.
    fn at(&self, t: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for k in 0..3 {
            let u = self.dirs[k][0] * t[0] + self.dirs[k][1] * t[1] + self.dirs[k][2] * t[2];
            let arg = std::f64::consts::TAU * self.freqs[k] * u;
            for axis in 0..3 {
                d[axis] += self.amps[axis][k] * (arg + self.phases[axis][k]).sin();
            }
        }
        d
    }
}

struct Raster<'a> {
    vol: &'a mut Array3<f32>,
    mask: &'a mut Array3<u8>,
    spacing: [f64; 3],
    vessel: f32,
    falloff: f64,
    background: f64,
    vessel_f64: f64,
}

impl Raster<'_> {
    /// Paint a capsule (cylinder with spherical caps) from p0 to p1, radius r,
    /// all in world mm. Solid core at vessel intensity, one-voxel linear
    /// falloff toward background outside it; composition is max.
    fn capsule(&mut self, p0: [f64; 3], p1: [f64; 3], r: f64) {
        let dims = self.vol.shape().to_vec();
        let reach = r + self.falloff;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let mn = p0[a].min(p1[a]) - reach;
            let mx = p0[a].max(p1[a]) + reach;
            let lo_i = (mn / self.spacing[a]).floor() as i64;
            let hi_i = (mx / self.spacing[a]).ceil() as i64;
            if hi_i < 0 || lo_i > dims[a] as i64 - 1 {
                return;
            }
            lo[a] = lo_i.max(0) as usize;
            hi[a] = hi_i.min(dims[a] as i64 - 1) as usize;
        }
        let seg = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let seg_len2 = seg[0] * seg[0] + seg[1] * seg[1] + seg[2] * seg[2];
        for i in lo[0]..=hi[0] {
            let cx = i as f64 * self.spacing[0];
            for j in lo[1]..=hi[1] {
                let cy = j as f64 * self.spacing[1];
                for k in lo[2]..=hi[2] {
                    let cz = k as f64 * self.spacing[2];
                    let w = [cx - p0[0], cy - p0[1], cz - p0[2]];
                    let t = if seg_len2 > 0.0 {
                        ((w[0] * seg[0] + w[1] * seg[1] + w[2] * seg[2]) / seg_len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let dx = w[0] - t * seg[0];
                    let dy = w[1] - t * seg[1];
                    let dz = w[2] - t * seg[2];
                    let d = (dx * dx + dy * dy + dz * dz).sqrt();
                    if d <= r {
                        self.vol[[i, j, k]] = self.vol[[i, j, k]].max(self.vessel);
                        self.mask[[i, j, k]] = 1;
                    } else if d <= reach {
                        let v = self.vessel_f64
                            + (self.background - self.vessel_f64) * (d - r) / self.falloff;
                        let v = v as f32;
                        if v > self.vol[[i, j, k]] {
                            self.vol[[i, j, k]] = v;
                        }
                    }
                }
            }
        }
    }
}

/// Generate one phantom. Deterministic given the spec (which includes the
/// seed).
pub fn generate_phantom(spec: &PhantomSpec) -> Result<PhantomSample> {
    spec.validate()?;
    let tpl = CowTemplate::build();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Draw everything whose count must not depend on the variant first: the
    // deformation field, then one radius per template edge. Absence edits are
    // pure edge deletions and never perturb the remaining geometry.
    let field = JitterField::draw(&mut rng, spec.jitter_scale);
    let [rmin, rmax] = spec.vessel_radius_range;
    let radii: Vec<f64> = (0..tpl.edges.len())
        .map(|_| rmin + rng.random::<f64>() * (rmax - rmin))
        .collect();

    let spacing = [
        spec.spacing[0] as f64,
        spec.spacing[1] as f64,
        spec.spacing[2] as f64,
    ];
    let to_world = |t: [f64; 3]| -> [f64; 3] {
        let mut w = [0.0; 3];
        for a in 0..3 {
            let vox = LANDMARK_MARGIN_VOX
                + t[a] * (spec.dims[a] as f64 - 1.0 - 2.0 * LANDMARK_MARGIN_VOX);
            w[a] = vox * spacing[a];
        }
        w
    };
    let place = |t: [f64; 3]| -> [f64; 3] {
        let w = to_world(t);
        let d = field.at(t);
        [w[0] + d[0], w[1] + d[1], w[2] + d[2]]
    };

    let node_world: Vec<[f64; 3]> = tpl.nodes.iter().map(|n| place(n.pos)).collect();

    let mut landmarks = LandmarkSet::new();
    for &l in &spec.present_landmarks {
        landmarks.set(l, WorldPoint(node_world[l.index()]));
    }

    let absent: BTreeSet<LandmarkLabel> = LandmarkLabel::ALL
        .iter()
        .copied()
        .filter(|l| !spec.present_landmarks.contains(l))
        .collect();
    let retained: Vec<usize> = tpl
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.deleted_when_absent.map_or(true, |l| !absent.contains(&l)))
        .map(|(i, _)| i)
        .collect();

    let bg = spec.background_intensity as f32;
    let mut vol = Array3::<f32>::from_elem(spec.dims, bg);
    let mut mask = Array3::<u8>::zeros(spec.dims);
    let falloff = (spacing[0] + spacing[1] + spacing[2]) / 3.0;
    let mut raster = Raster {
        vol: &mut vol,
        mask: &mut mask,
        spacing,
        vessel: spec.vessel_intensity as f32,
        falloff,
        background: spec.background_intensity,
        vessel_f64: spec.vessel_intensity,
    };

    for &ei in &retained {
        let e = &tpl.edges[ei];
        let ta = tpl.nodes[e.a].pos;
        let tb = tpl.nodes[e.b].pos;
        let wa = to_world(ta);
        let wb = to_world(tb);
        let len_vox = (0..3)
            .map(|a| ((wb[a] - wa[a]) / spacing[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let n_sub = ((len_vox / 1.5).ceil() as usize).max(1);
        let mut prev = place(ta);
        for s in 1..=n_sub {
            let f = s as f64 / n_sub as f64;
            let t = [
                ta[0] + (tb[0] - ta[0]) * f,
                ta[1] + (tb[1] - ta[1]) * f,
                ta[2] + (tb[2] - ta[2]) * f,
            ];
            let cur = place(t);
            raster.capsule(prev, cur, radii[ei]);
            prev = cur;
        }
    }

    for an in &spec.aneurysms {
        let r = (3.0 * an.volume_mm3 / (4.0 * std::f64::consts::PI)).cbrt();
        let j = node_world[an.label.index()];
        // grow away from the incident branches: opposite the mean branch direction
        let mut mean = [0.0f64; 3];
        for &ei in &retained {
            let e = &tpl.edges[ei];
            let other = if e.a == an.label.index() {
                Some(e.b)
            } else if e.b == an.label.index() {
                Some(e.a)
            } else {
                None
            };
            if let Some(o) = other {
                let w = node_world[o];
                let d = [w[0] - j[0], w[1] - j[1], w[2] - j[2]];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
                for a in 0..3 {
                    mean[a] += d[a] / n;
                }
            }
        }
        let n = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
        let preferred = if n > 1e-6 {
            [-mean[0] / n, -mean[1] / n, -mean[2] / n]
        } else {
            [0.0, 0.0, 1.0]
        };
        let mut candidates = vec![preferred];
        for a in 0..3 {
            for s in [1.0, -1.0] {
                let mut d = [0.0; 3];
                d[a] = s;
                candidates.push(d);
            }
        }
        candidates[1..].sort_by(|x, y| {
            let dx: f64 = -(x[0] * preferred[0] + x[1] * preferred[1] + x[2] * preferred[2]);
            let dy: f64 = -(y[0] * preferred[0] + y[1] * preferred[1] + y[2] * preferred[2]);
            dx.partial_cmp(&dy).unwrap()
        });
        let fits = |dir: &[f64; 3]| {
            (0..3).all(|a| {
                let c = j[a] + dir[a] * r;
                c - r >= 0.0 && c + r <= (spec.dims[a] as f64 - 1.0) * spacing[a]
            })
        };
        let dir = candidates.iter().find(|d| fits(d)).ok_or_else(|| {
            Error::config(format!(
                "aneurysm of {} mm^3 at {} does not fit inside the volume",
                an.volume_mm3, an.label
            ))
        })?;
        let center = [j[0] + dir[0] * r, j[1] + dir[1] * r, j[2] + dir[2] * r];
        raster.capsule(center, center, r);
    }

    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0f64, spec.noise_sigma)
            .map_err(|e| Error::config(format!("noise sigma: {e}")))?;
        for v in vol.iter_mut() {
            *v += normal.sample(&mut rng) as f32;
        }
    }

    // margin invariant: ground truth stays >= 16 voxels from every face
    let volume = Volume3D::new(vol, spec.spacing, [0.0; 3])?;
    for (l, p) in landmarks.iter_present() {
        let v = volume.world_to_voxel(p);
        for a in 0..3 {
            let m = v[a].min(spec.dims[a] as f64 - 1.0 - v[a]);
            if m < 16.0 {
                return Err(Error::runtime(format!(
                    "landmark {l} margin {m:.2} voxels < 16 (template scaling bug)"
                )));
            }
        }
    }

    Ok(PhantomSample {
        volume,
        landmarks,
        vessel_mask: mask,
        manifest: spec.clone(),
    })
}

/// Per-label absence probabilities applied when generating a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantPolicy {
    /// Probability of cutting the posterior tree: L and M drop jointly.
    pub posterior_cut_prob: f64,
    /// Extra independent per-label absence probabilities.
    pub label_absence: BTreeMap<LandmarkLabel, f64>,
    /// Probability that a sample carries one aneurysm at a random present label.
    pub aneurysm_prob: f64,
    pub aneurysm_volume_range: [f64; 2],
}

impl Default for VariantPolicy {
    fn default() -> Self {
        VariantPolicy {
            posterior_cut_prob: 0.0,
            label_absence: BTreeMap::new(),
            aneurysm_prob: 0.0,
            aneurysm_volume_range: [2.0, 1050.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub seed: u64,
    pub absent: Vec<LandmarkLabel>,
    pub aneurysms: Vec<AneurysmSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub master_seed: u64,
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<DatasetManifest> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Resolve the per-sample specs for a dataset without generating anything.
pub fn plan_dataset(
    n: usize,
    base: &PhantomSpec,
    policy: &VariantPolicy,
) -> Result<Vec<PhantomSpec>> {
    if n < 1 {
        return Err(Error::config("dataset size must be >= 1"));
    }
    base.validate()?;
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        let seed = derive_seed(base.seed, &format!("sample/{i}"));
        let mut vrng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "variants"));
        let mut present = base.present_landmarks.clone();
        if vrng.random::<f64>() < policy.posterior_cut_prob {
            present.remove(&LandmarkLabel::L);
            present.remove(&LandmarkLabel::M);
        }
        for &l in &LandmarkLabel::ALL {
            let p = policy.label_absence.get(&l).copied().unwrap_or(0.0);
            if vrng.random::<f64>() < p {
                present.remove(&l);
            }
        }
        if present.is_empty() {
            return Err(Error::config(
                "variant policy removed every landmark from a sample",
            ));
        }
        let mut aneurysms = base.aneurysms.clone();
        if vrng.random::<f64>() < policy.aneurysm_prob {
            let labels: Vec<LandmarkLabel> = present.iter().copied().collect();
            let label = labels[vrng.random_range(0..labels.len())];
            let [vmin, vmax] = policy.aneurysm_volume_range;
            let volume_mm3 = vmin + vrng.random::<f64>() * (vmax - vmin);
            aneurysms.push(AneurysmSpec { label, volume_mm3 });
        }
        let mut spec = base.clone();
        spec.present_landmarks = present;
        spec.aneurysms = aneurysms;
        spec.seed = seed;
        specs.push(spec);
    }
    Ok(specs)
}

pub fn sample_id(i: usize) -> String {
    format!("phantom_{i:03}")
}

/// Generate `n` phantoms and write them (volume, landmarks, vessel mask,
/// manifest) under `out_dir`. `jobs` > 1 generates samples in parallel;
/// outputs are identical regardless.
pub fn generate_dataset(
    n: usize,
    base: &PhantomSpec,
    policy: &VariantPolicy,
    out_dir: &Path,
    jobs: usize,
) -> Result<DatasetManifest> {
    let specs = plan_dataset(n, base, policy)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", out_dir.display())))?;

    let write_one = |i: usize, spec: &PhantomSpec| -> Result<()> {
        let sample = generate_phantom(spec)?;
        let id = sample_id(i);
        nifti::write_volume(&out_dir.join(format!("{id}.nii.gz")), &sample.volume)?;
        write_landmarks(
            &out_dir.join(format!("{id}.landmarks.json")),
            &sample.landmarks,
            spec.spacing,
        )?;
        nifti::write_mask(
            &out_dir.join(format!("{id}.mask.nii.gz")),
            &sample.vessel_mask,
            spec.spacing,
            [0.0; 3],
        )?;
        Ok(())
    };

    let jobs = jobs.max(1);
    if jobs == 1 {
        for (i, spec) in specs.iter().enumerate() {
            write_one(i, spec)?;
        }
    } else {
        let items: Vec<(usize, &PhantomSpec)> = specs.iter().enumerate().collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let errors = std::sync::Mutex::new(Vec::<Error>::new());
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= items.len() {
                        break;
                    }
                    let (idx, spec) = items[i];
                    if let Err(e) = write_one(idx, spec) {
                        errors.lock().unwrap().push(e);
                        break;
                    }
                });
            }
        });
        if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
            return Err(e);
        }
    }

    let manifest = DatasetManifest {
        master_seed: base.seed,
        dims: base.dims,
        spacing: base.spacing,
        samples: specs
            .iter()
            .enumerate()
            .map(|(i, s)| SampleEntry {
                id: sample_id(i),
                seed: s.seed,
                absent: LandmarkLabel::ALL
                    .iter()
                    .copied()
                    .filter(|l| !s.present_landmarks.contains(l))
                    .collect(),
                aneurysms: s.aneurysms.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Load a written sample back: volume, landmarks, and the vessel mask when
/// present (annotation building falls back to all-ones box masks without it).
pub fn read_sample(dir: &Path, id: &str) -> Result<(Volume3D, LandmarkSet, Option<Array3<u8>>)> {
    let volume = nifti::read_volume(&dir.join(format!("{id}.nii.gz")))?;
    let landmarks = crate::landmarks::read_landmarks(&dir.join(format!("{id}.landmarks.json")))?;
    let mask_path = dir.join(format!("{id}.mask.nii.gz"));
    let mask = if mask_path.exists() {
        Some(nifti::read_mask(&mask_path)?)
    } else {
        None
    };
    Ok((volume, landmarks, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_spec(seed: u64) -> PhantomSpec {
        PhantomSpec {
            jitter_scale: 0.0,
            noise_sigma: 0.0,
            seed,
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = PhantomSpec { seed: 42, ..PhantomSpec::default() };
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        assert_eq!(a.landmarks, b.landmarks);
        assert!(a
            .volume
            .data()
            .iter()
            .zip(b.volume.data().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.vessel_mask, b.vessel_mask);
    }

    #[test]
    fn noiseless_template_landmarks_and_intensities() {
        let spec = quiet_spec(1);
        let s = generate_phantom(&spec).unwrap();
        let tpl = CowTemplate::build();
        assert_eq!(s.landmarks.present_count(), 13);
        for &l in &LandmarkLabel::ALL {
            let p = s.landmarks.get(l).unwrap();
            // template coordinates, scaled: vox = 20 + t*(127-40)
            for a in 0..3 {
                let expect = (20.0 + tpl.label_node(l).pos[a] * 87.0) * spec.spacing[a] as f64;
                assert!((p.0[a] - expect).abs() < 1e-9, "{l} axis {a}");
            }
            // landmark voxel is solid vessel
            let v = s.volume.nearest_voxel(p);
            let val = s.volume.data()[[v.0[0] as usize, v.0[1] as usize, v.0[2] as usize]];
            assert_eq!(val, spec.vessel_intensity as f32, "{l}");
        }
    }

    #[test]
    fn mask_mean_is_exactly_vessel_intensity_without_noise() {
        let s = generate_phantom(&quiet_spec(3)).unwrap();
        let mut n = 0usize;
        for (idx, &m) in s.vessel_mask.indexed_iter() {
            if m == 1 {
                n += 1;
                assert_eq!(s.volume.data()[idx], 100.0f32);
            }
        }
        assert!(n > 5000, "mask suspiciously small: {n}");
    }

    #[test]
    fn paired_landmarks_are_8_to_14_voxels_apart() {
        let s = generate_phantom(&quiet_spec(5)).unwrap();
        use LandmarkLabel::*;
        for (x, y) in [(A, B), (C, G), (D, H)] {
            let px = s.landmarks.get(x).unwrap();
            let py = s.landmarks.get(y).unwrap();
            let d_vox = px.distance(&py) / 0.4;
            assert!(
                (8.0..=14.0).contains(&d_vox),
                "{x}-{y} separation {d_vox:.2} voxels"
            );
        }
    }

    #[test]
    fn landmarks_keep_16_voxel_margin_with_jitter() {
        for seed in 0..5 {
            let spec = PhantomSpec { seed, ..PhantomSpec::default() };
            let s = generate_phantom(&spec).unwrap();
            for (l, p) in s.landmarks.iter_present() {
                let v = s.volume.world_to_voxel(p);
                for a in 0..3 {
                    assert!(v[a] >= 16.0 && v[a] <= 111.0, "{l} at {v:?} (seed {seed})");
                }
            }
        }
    }

    #[test]
    fn absence_is_distal_only_and_never_moves_others() {
        let full = generate_phantom(&PhantomSpec { seed: 9, ..PhantomSpec::default() }).unwrap();
        for drop in LandmarkLabel::ALL {
            let mut present: BTreeSet<LandmarkLabel> =
                LandmarkLabel::ALL.iter().copied().collect();
            present.remove(&drop);
            let spec = PhantomSpec {
                seed: 9,
                present_landmarks: present,
                ..PhantomSpec::default()
            };
            let s = generate_phantom(&spec).unwrap();
            assert!(s.landmarks.get(drop).is_none());
            for (l, p) in s.landmarks.iter_present() {
                assert_eq!(p, full.landmarks.get(l).unwrap(), "dropping {drop} moved {l}");
            }
        }
    }

    #[test]
    fn aneurysm_adds_its_analytic_volume_to_the_mask() {
        // mask voxels gained vs the analytic sphere volume, within 10%
        let base = quiet_spec(13);
        let without = generate_phantom(&base).unwrap();
        let mut with_spec = base.clone();
        with_spec
            .aneurysms
            .push(AneurysmSpec { label: LandmarkLabel::F, volume_mm3: 1050.0 });
        let with = generate_phantom(&with_spec).unwrap();
        let n0: usize = without.vessel_mask.iter().map(|&m| m as usize).sum();
        let n1: usize = with.vessel_mask.iter().map(|&m| m as usize).sum();
        let gained = (n1 - n0) as f64;
        let voxel_volume = 0.4f64.powi(3);
        let expected = 1050.0 / voxel_volume;
        let rel = (gained - expected).abs() / expected;
        assert!(rel < 0.10, "gained {gained}, expected {expected}, rel {rel:.3}");

        // sphere radius for 1050 mm^3 is about 6.3 mm and sits tangent to F
        let r = (3.0 * 1050.0 / (4.0 * std::f64::consts::PI)).cbrt();
        assert!((6.2..6.4).contains(&r));
        let f = with.landmarks.get(LandmarkLabel::F).unwrap();
        let near = with.volume.nearest_voxel(WorldPoint::new(f.0[0], f.0[1], f.0[2]));
        assert!(with.vessel_mask[[near.0[0] as usize, near.0[1] as usize, near.0[2] as usize]] == 1);
    }

    #[test]
    fn aneurysm_at_absent_landmark_is_rejected() {
        let mut spec = quiet_spec(1);
        spec.present_landmarks.remove(&LandmarkLabel::M);
        spec.aneurysms
            .push(AneurysmSpec { label: LandmarkLabel::M, volume_mm3: 100.0 });
        assert!(generate_phantom(&spec).is_err());
    }

    #[test]
    fn dataset_generation_and_manifest_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let base = PhantomSpec { dims: [64, 64, 64], ..quiet_spec(77) };
        let policy = VariantPolicy::default();
        let m = generate_dataset(3, &base, &policy, dir.path(), 1).unwrap();
        assert_eq!(m.samples.len(), 3);
        for s in &m.samples {
            assert!(s.absent.is_empty());
            let (_, lm, mask) = read_sample(dir.path(), &s.id).unwrap();
            assert_eq!(lm.present_count(), 13);
            assert!(mask.is_some());
        }

        // posterior cut probability 1: every sample lacks L and M
        let policy = VariantPolicy { posterior_cut_prob: 1.0, ..VariantPolicy::default() };
        let dir2 = tempfile::tempdir().unwrap();
        let m2 = generate_dataset(3, &base, &policy, dir2.path(), 2).unwrap();
        for s in &m2.samples {
            assert!(s.absent.contains(&LandmarkLabel::L) && s.absent.contains(&LandmarkLabel::M));
            let (_, lm, _) = read_sample(dir2.path(), &s.id).unwrap();
            assert!(!lm.is_present(LandmarkLabel::L) && !lm.is_present(LandmarkLabel::M));
        }

        // identical manifest bytes across reruns with the same master seed
        let dir3 = tempfile::tempdir().unwrap();
        generate_dataset(3, &base, &policy, dir3.path(), 1).unwrap();
        let b2 = std::fs::read(dir2.path().join("manifest.json")).unwrap();
        let b3 = std::fs::read(dir3.path().join("manifest.json")).unwrap();
        assert_eq!(b2, b3);
    }
}
