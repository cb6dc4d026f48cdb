//! Training pairs for the map predictors: encoding, hole filling,
//! flip augmentation, leakage-free splitting and on-disk datasets.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Px};
use crate::io;
use crate::nn::Tensor;
use crate::oracle::{compute_maps, PropagationParams, RadioMaps};
use crate::scene::{SceneGenerator, SceneSpec, TxDescriptor};

/// Min-max clip ranges used to map dB values onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub rss_floor_dbm: f64,
    /// 4.77e-10 W expressed in dBm.
    pub rss_ceil_dbm: f64,
    pub exp_floor_dbuv: f64,
    pub exp_ceil_dbuv: f64,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec {
            rss_floor_dbm: -150.0,
            rss_ceil_dbm: -63.2,
            exp_floor_dbuv: 0.0,
            exp_ceil_dbuv: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Rss,
    Exposure,
}

impl EncodingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rss_floor_dbm < self.rss_ceil_dbm) || !(self.exp_floor_dbuv < self.exp_ceil_dbuv)
        {
            return Err(Error::InvalidConfig(format!(
                "encoding floor must be below ceiling: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn range(&self, ch: Channel) -> (f64, f64) {
        match ch {
            Channel::Rss => (self.rss_floor_dbm, self.rss_ceil_dbm),
            Channel::Exposure => (self.exp_floor_dbuv, self.exp_ceil_dbuv),
        }
    }

    /// Width of the encoded range, used as the SSIM dynamic range.
    pub fn span(&self, ch: Channel) -> f64 {
        let (lo, hi) = self.range(ch);
        hi - lo
    }

    pub fn normalize(&self, v: f64, ch: Channel) -> f64 {
        let (lo, hi) = self.range(ch);
        2.0 * (v.clamp(lo, hi) - lo) / (hi - lo) - 1.0
    }

    pub fn denormalize(&self, v: f64, ch: Channel) -> f64 {
        let (lo, hi) = self.range(ch);
        lo + (v + 1.0) * 0.5 * (hi - lo)
    }

    pub fn normalize_grid(&self, g: &Grid<f64>, ch: Channel) -> Grid<f64> {
        g.map(|&v| self.normalize(v, ch))
    }

    pub fn denormalize_grid(&self, g: &Grid<f64>, ch: Channel) -> Grid<f64> {
        g.map(|&v| self.denormalize(v, ch))
    }
}

/// Replace every invalid pixel with the value of its nearest valid pixel
/// (Euclidean pixel distance; ties go to the earliest valid pixel in row-major order).
pub fn fill_missing(map: &Grid<f64>, valid: &Mask) -> Result<Grid<f64>> {
    if map.size() != valid.size() {
        return Err(Error::shape(map.size(), valid.size()));
    }
    if valid.count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let n = map.size() as i64;
    let mut out = map.clone();
    for (p, &ok) in valid.indexed() {
        if ok {
            continue;
        }
        let (pi, pj) = (p.0 as i64, p.1 as i64);
        // (squared distance, row-major index)
        let mut best: Option<(i64, i64)> = None;
        let mut r = 1i64;
        loop {
            if let Some((d2, _)) = best {
                if r * r > d2 {
                    break;
                }
            }
            if r > 2 * n {
                break;
            }
            for i in pi - r..=pi + r {
                if i < 0 || i >= n {
                    continue;
                }
                let edge = i == pi - r || i == pi + r;
                let js: Vec<i64> = if edge {
                    (pj - r..=pj + r).collect()
                } else {
                    vec![pj - r, pj + r]
                };
                for j in js {
                    if j < 0 || j >= n || !valid[(i as usize, j as usize)] {
                        continue;
                    }
                    let d2 = (i - pi).pow(2) + (j - pj).pow(2);
                    let idx = i * n + j;
                    if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && idx < bi)) {
                        best = Some((d2, idx));
                    }
                }
            }
            r += 1;
        }
        let (_, idx) = best.expect("at least one valid pixel");
        out[p] = map[((idx / n) as usize, (idx % n) as usize)];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Original,
    FlipH,
    FlipV,
    Rot180,
}

/// One normalized training pair. `input` and `target` are `[1, 2, L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub base_id: usize,
    pub variant: Variant,
    pub input: Tensor,
    pub target: Tensor,
}

fn grid_to_plane(g: &Grid<f64>) -> impl Iterator<Item = f32> + '_ {
    g.iter().map(|&v| v as f32)
}

/// Two-channel condition tensor: building map (building 0, outdoor 1) and TX map.
pub fn encode_input(scene: &SceneSpec, txs: &[Px]) -> Tensor {
    let n = scene.grid_size();
    let mut t = Tensor::zeros(1, 2, n, n);
    for (k, &b) in scene.buildings().iter().enumerate() {
        t.data[k] = if b { 0.0 } else { 1.0 };
    }
    let tx_plane = t.channel_mut(0, 1);
    for &(i, j) in txs {
        tx_plane[i * n + j] = 1.0;
    }
    t
}

/// Normalized, hole-filled two-channel target tensor.
pub fn encode_target(maps: &RadioMaps, enc: &EncodingSpec) -> Result<Tensor> {
    let n = maps.rss_dbm.size();
    let rss = enc.normalize_grid(
        &fill_missing(&maps.rss_dbm, &maps.valid_mask)?,
        Channel::Rss,
    );
    let exp = enc.normalize_grid(
        &fill_missing(&maps.exposure_dbuv, &maps.valid_mask)?,
        Channel::Exposure,
    );
    let data: Vec<f32> = grid_to_plane(&rss).chain(grid_to_plane(&exp)).collect();
    Ok(Tensor::from_vec(1, 2, n, n, data))
}

/// Denormalize one `[2, L, L]` prediction into dB maps; validity comes from
/// the building channel of the matching input.
pub fn decode_maps(pred: &[f32], input: &[f32], n: usize, enc: &EncodingSpec) -> Result<RadioMaps> {
    let plane = n * n;
    if pred.len() != 2 * plane || input.len() < plane {
        return Err(Error::shape(2 * plane, pred.len()));
    }
    let grid = |ch: usize, c: Channel| {
        Grid::from_vec(
            n,
            pred[ch * plane..(ch + 1) * plane]
                .iter()
                .map(|&v| enc.denormalize(v as f64, c))
                .collect(),
        )
    };
    Ok(RadioMaps {
        rss_dbm: grid(0, Channel::Rss)?,
        exposure_dbuv: grid(1, Channel::Exposure)?,
        valid_mask: Grid::from_vec(n, input[..plane].iter().map(|&v| v > 0.5).collect())?,
    })
}

fn transform_tensor(t: &Tensor, f: impl Fn(usize, usize) -> (usize, usize)) -> Tensor {
    let mut out = t.zeros_like();
    let w = t.w;
    for i in 0..t.n {
        for ch in 0..t.c {
            let src = t.channel(i, ch);
            let dst = out.channel_mut(i, ch);
            for a in 0..t.h {
                for b in 0..w {
                    let (sa, sb) = f(a, b);
                    dst[a * w + b] = src[sa * w + sb];
                }
            }
        }
    }
    out
}

impl Sample {
    pub fn grid_size(&self) -> usize {
        self.input.h
    }

    /// Mirror across the vertical axis (column j ↦ L−1−j).
    pub fn flip_h(&self) -> Sample {
        let n = self.grid_size();
        let f = |a, b| (a, n - 1 - b);
        Sample {
            input: transform_tensor(&self.input, f),
            target: transform_tensor(&self.target, f),
            ..self.clone()
        }
    }

    /// Mirror across the horizontal axis (row i ↦ L−1−i).
    pub fn flip_v(&self) -> Sample {
        let n = self.grid_size();
        let f = |a, b| (n - 1 - a, b);
        Sample {
            input: transform_tensor(&self.input, f),
            target: transform_tensor(&self.target, f),
            ..self.clone()
        }
    }

    fn with_variant(mut self, variant: Variant) -> Sample {
        self.variant = variant;
        self
    }

    pub fn tx_count(&self) -> usize {
        self.input
            .channel(0, 1)
            .iter()
            .filter(|&&v| v > 0.5)
            .count()
    }
}

/// Originals followed by their horizontal flips, vertical flips and, when
/// requested, 180° rotations.
pub fn augment(samples: &[Sample], include_rot180: bool) -> Vec<Sample> {
    let mut out: Vec<Sample> = samples.to_vec();
    out.extend(
        samples
            .iter()
            .map(|s| s.flip_h().with_variant(Variant::FlipH)),
    );
    out.extend(
        samples
            .iter()
            .map(|s| s.flip_v().with_variant(Variant::FlipV)),
    );
    if include_rot180 {
        out.extend(
            samples
                .iter()
                .map(|s| s.flip_h().flip_v().with_variant(Variant::Rot180)),
        );
    }
    out
}

/// Base sample ids assigned to the training and test sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle distinct base ids with `seed`; the first ⌊B·(1−r)⌋ go to training.
pub fn split_ids(base_ids: &BTreeSet<usize>, val_ratio: f64, seed: u64) -> Result<SplitIds> {
    if !(val_ratio > 0.0 && val_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "val_ratio {val_ratio} must lie in (0, 1)"
        )));
    }
    if base_ids.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 base samples to split, got {}",
            base_ids.len()
        )));
    }
    let mut ids: Vec<usize> = base_ids.iter().copied().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ids.len() as f64 * (1.0 - val_ratio)).floor() as usize;
    let test = ids.split_off(n_train);
    Ok(SplitIds { train: ids, test })
}

/// Split samples so that every variant of a base sample lands on the same side.
pub fn split(
    samples: Vec<Sample>,
    val_ratio: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let ids = split_ids(
        &samples.iter().map(|s| s.base_id).collect(),
        val_ratio,
        seed,
    )?;
    let train_ids: BTreeSet<usize> = ids.train.into_iter().collect();
    Ok(samples
        .into_iter()
        .partition(|s| train_ids.contains(&s.base_id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub tx_min: usize,
    pub tx_max: usize,
    pub seed: u64,
    pub generator: SceneGenerator,
    pub encoding: EncodingSpec,
}

impl DatasetConfig {
    /// Desk-scale profile: 64×64 scenes.
    pub fn toy(n_samples: usize, seed: u64) -> Self {
        DatasetConfig {
            n_samples,
            tx_min: 1,
            tx_max: 3,
            seed,
            generator: SceneGenerator::for_grid(64),
            encoding: EncodingSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.tx_min < 1 || self.tx_min > self.tx_max || self.tx_max > 8 {
            return Err(Error::InvalidConfig(format!(
                "tx count range {}..={} must lie within 1..=8",
                self.tx_min, self.tx_max
            )));
        }
        self.encoding.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub scene_seed: u64,
    pub tx_list: Vec<TxDescriptor>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: DatasetConfig,
    pub grid_size: usize,
    /// Planes per sample file: building, tx, rss, exposure.
    pub planes: Vec<String>,
    pub skipped_scenes: usize,
    pub samples: Vec<SampleRecord>,
}

/// An in-memory dataset of base (un-augmented) samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

/// Random outdoor TX positions, pairwise distinct.
pub fn random_txs(scene: &SceneSpec, count: usize, rng: &mut impl Rng) -> Result<Vec<Px>> {
    let outdoor: Vec<Px> = scene
        .outdoor_mask()
        .indexed()
        .filter(|(_, &o)| o)
        .map(|(p, _)| p)
        .collect();
    if outdoor.len() < count {
        return Err(Error::InfeasibleScene(format!(
            "{} outdoor pixels for {count} transmitters",
            outdoor.len()
        )));
    }
    Ok(outdoor.choose_multiple(rng, count).copied().collect())
}

/// Build one sample from a scene whose `tx_list` is already populated.
pub fn make_sample(
    scene: &SceneSpec,
    params: &PropagationParams,
    enc: &EncodingSpec,
    base_id: usize,
) -> Result<Sample> {
    let maps = compute_maps(scene, params);
    let txs: Vec<Px> = scene.tx_list.iter().map(|t| t.position_px).collect();
    Ok(Sample {
        base_id,
        variant: Variant::Original,
        input: encode_input(scene, &txs),
        target: encode_target(&maps, enc)?,
    })
}

/// Draw random scenes and TX placements and label them with the oracle.
/// Infeasible scenes are skipped and counted.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let n = config.generator.grid_size;
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut records = Vec::with_capacity(config.n_samples);
    let mut skipped = 0usize;
    let mut attempt = 0u64;
    let max_attempts = 10 * config.n_samples as u64 + 10;
    while samples.len() < config.n_samples {
        if attempt >= max_attempts {
            return Err(Error::InfeasibleScene(format!(
                "only {} of {} samples after {attempt} attempts",
                samples.len(),
                config.n_samples
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(attempt);
        attempt += 1;
        let scene_seed: u64 = rng.random();
        let scene = match config.generator.generate(scene_seed) {
            Ok(s) => s,
            Err(Error::InfeasibleScene(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let count = rng.random_range(config.tx_min..=config.tx_max);
        let txs: Vec<TxDescriptor> = random_txs(&scene, count, &mut rng)?
            .into_iter()
            .map(TxDescriptor::at)
            .collect();
        let scene = scene.with_txs(txs)?;
        let id = samples.len();
        let params = PropagationParams::for_scene(&scene);
        samples.push(make_sample(&scene, &params, &config.encoding, id)?);
        records.push(SampleRecord {
            id,
            scene_seed,
            tx_list: scene.tx_list.clone(),
            file: format!("samples/{id:05}.f32"),
        });
    }
    if skipped > 0 {
        log::info!("skipped {skipped} infeasible scenes");
    }
    let manifest = DatasetManifest {
        config: config.clone(),
        grid_size: n,
        planes: ["building", "tx", "rss_norm", "exposure_norm"]
            .map(String::from)
            .to_vec(),
        skipped_scenes: skipped,
        samples: records,
    };
    Ok(Dataset { manifest, samples })
}

impl Dataset {
    pub fn grid_size(&self) -> usize {
        self.manifest.grid_size
    }

    pub fn encoding(&self) -> &EncodingSpec {
        &self.manifest.config.encoding
    }

    /// Writes `manifest.json` and one float32 file of four planes per sample.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        io::write_json(&dir.join("manifest.json"), &self.manifest)?;
        for (rec, s) in self.manifest.samples.iter().zip(&self.samples) {
            let bytes: Vec<u8> = s
                .input
                .data
                .iter()
                .chain(&s.target.data)
                .flat_map(|v| v.to_le_bytes())
                .collect();
            io::write_bytes(&dir.join(&rec.file), &bytes)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest: DatasetManifest = io::read_json(&dir.join("manifest.json"))?;
        let n = manifest.grid_size;
        let plane = n * n;
        let mut samples = Vec::with_capacity(manifest.samples.len());
        for rec in &manifest.samples {
            let path = dir.join(&rec.file);
            let bytes = io::read_bytes(&path)?;
            if bytes.len() != 16 * plane {
                return Err(Error::shape(16 * plane, bytes.len()));
            }
            let vals: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            samples.push(Sample {
                base_id: rec.id,
                variant: Variant::Original,
                input: Tensor::from_vec(1, 2, n, n, vals[..2 * plane].to_vec()),
                target: Tensor::from_vec(1, 2, n, n, vals[2 * plane..].to_vec()),
            });
        }
        Ok(Dataset { manifest, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_anchor_values() {
        let e = EncodingSpec::default();
        assert!((e.normalize(-63.2, Channel::Rss) - 1.0).abs() < 1e-12);
        assert_eq!(e.normalize(-150.0, Channel::Rss), -1.0);
        assert_eq!(e.normalize(-400.0, Channel::Rss), -1.0);
        assert!(e.normalize(-106.6, Channel::Rss).abs() < 1e-12);
        assert_eq!(e.normalize(60.0, Channel::Exposure), 0.0);
        for v in [-149.0, -120.5, -70.0] {
            assert!((e.denormalize(e.normalize(v, Channel::Rss), Channel::Rss) - v).abs() < 1e-6);
        }
        assert!(EncodingSpec {
            rss_floor_dbm: 0.0,
            rss_ceil_dbm: -1.0,
            ..e
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fill_missing_cases() {
        let g = Grid::from_fn(4, |i, j| (i * 4 + j) as f64);
        assert_eq!(fill_missing(&g, &Grid::filled(4, true)).unwrap(), g);

        let mut one = Grid::filled(4, false);
        one[(2, 1)] = true;
        assert!(fill_missing(&g, &one).unwrap().iter().all(|&v| v == 9.0));

        let mut row = Grid::filled(4, false);
        row[(0, 0)] = true;
        row[(0, 3)] = true;
        let mut m = Grid::filled(4, 0.0);
        m[(0, 0)] = 10.0;
        m[(0, 3)] = 30.0;
        let f = fill_missing(&m, &row).unwrap();
        assert_eq!(
            [f[(0, 0)], f[(0, 1)], f[(0, 2)], f[(0, 3)]],
            [10.0, 10.0, 30.0, 30.0]
        );
        assert_eq!(f[(1, 1)], 10.0);
        assert!(matches!(
            fill_missing(&m, &Grid::filled(4, false)),
            Err(Error::NoValidPixels)
        ));
    }

    #[test]
    fn fill_missing_tie_breaks_row_major() {
        // Centre pixel equidistant from (0,1) and (2,1): the earlier one wins.
        let mut valid = Grid::filled(3, false);
        valid[(0, 1)] = true;
        valid[(2, 1)] = true;
        let mut m = Grid::filled(3, 0.0);
        m[(0, 1)] = 1.0;
        m[(2, 1)] = 2.0;
        assert_eq!(fill_missing(&m, &valid).unwrap()[(1, 1)], 1.0);
    }

    fn small_dataset(n: usize, seed: u64) -> Dataset {
        let mut cfg = DatasetConfig::toy(n, seed);
        cfg.generator = SceneGenerator::for_grid(16);
        generate_dataset(&cfg).unwrap()
    }

    #[test]
    fn augmentation_sizes_and_involution() {
        let ds = small_dataset(4, 1);
        let aug = augment(&ds.samples, false);
        assert_eq!(aug.len(), 12);
        assert_eq!(augment(&ds.samples, true).len(), 16);
        for s in &ds.samples {
            assert_eq!(s.flip_h().flip_h(), *s);
            assert_eq!(s.flip_v().flip_v(), *s);
        }
        assert!(aug.iter().filter(|s| s.variant == Variant::FlipH).count() == 4);
    }

    #[test]
    fn symmetric_sample_is_flip_fixed_point() {
        let scene = SceneSpec::open(16, 200.0).unwrap();
        let s = make_sample(
            &scene,
            &PropagationParams::for_scene(&scene),
            &EncodingSpec::default(),
            0,
        )
        .unwrap();
        assert_eq!(s.flip_h(), s);
        // Mirror-symmetric building pair with no transmitter.
        let mut b = Grid::filled(16, false);
        b[(3, 2)] = true;
        b[(3, 13)] = true;
        let scene = SceneSpec::new(200.0, b, vec![], 0).unwrap();
        let s = make_sample(
            &scene,
            &PropagationParams::for_scene(&scene),
            &EncodingSpec::default(),
            0,
        )
        .unwrap();
        assert_eq!(s.flip_h(), s);
    }

    #[test]
    fn split_sizes_and_grouping() {
        let ids: BTreeSet<usize> = (0..5000).collect();
        let s = split_ids(&ids, 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (4500, 500));
        assert_eq!(s, split_ids(&ids, 0.1, 3).unwrap());
        let two: BTreeSet<usize> = [0, 1].into();
        let s = split_ids(&two, 0.5, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
        assert!(split_ids(&[0].into(), 0.5, 0).is_err());
        assert!(split_ids(&two, 1.0, 0).is_err());

        let ds = small_dataset(10, 2);
        let (train, test) = split(augment(&ds.samples, false), 0.2, 9).unwrap();
        assert_eq!((train.len(), test.len()), (24, 6));
        let tr: BTreeSet<usize> = train.iter().map(|s| s.base_id).collect();
        assert!(test.iter().all(|s| !tr.contains(&s.base_id)));
    }

    #[test]
    fn dataset_generation_is_deterministic_and_respects_tx_range() {
        let a = small_dataset(10, 3);
        let b = small_dataset(10, 3);
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.samples, b.samples);
        for s in &a.samples {
            assert!((1..=3).contains(&s.tx_count()));
            assert!(s.target.data.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(s.input.data.iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let mut bad = DatasetConfig::toy(5, 0);
        bad.tx_max = 9;
        assert!(generate_dataset(&bad).is_err());
    }

    #[test]
    fn dataset_disk_round_trip() {
        let ds = small_dataset(5, 4);
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back.manifest, ds.manifest);
        assert_eq!(back.samples, ds.samples);
    }

    #[test]
    fn decode_matches_oracle_on_valid_pixels() {
        let ds = small_dataset(1, 5);
        let s = &ds.samples[0];
        let rec = &ds.manifest.samples[0];
        let scene = ds
            .manifest
            .config
            .generator
            .generate(rec.scene_seed)
            .unwrap()
            .with_txs(rec.tx_list.clone())
            .unwrap();
        let maps = compute_maps(&scene, &PropagationParams::for_scene(&scene));
        let dec = decode_maps(&s.target.data, &s.input.data, 16, ds.encoding()).unwrap();
        assert_eq!(dec.valid_mask, maps.valid_mask);
        for (p, &ok) in maps.valid_mask.indexed() {
            let want = maps.rss_dbm[p].clamp(-150.0, -63.2);
            if ok {
                assert!((dec.rss_dbm[p] - want).abs() < 1e-3, "{p:?}");
            }
        }
    }
}
