//! Datasets: amplitude-encoded digit images and transverse-field Ising
//! ground states labeled by phase.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulator::{StateVector, C64};
use crate::textfmt::{fmt_f64, parse_f64, parse_u64, parse_usize, write_atomic, Document};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const RESIZED_SIDE: usize = 16;

/// Couplings inside this open window are never sampled.
pub const CRITICAL_WINDOW: (f64, f64) = (0.95, 1.05);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMeta {
    Ising { j_x: f64 },
    Digit { digit: u8, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub state: StateVector,
    pub label: u8,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<LabeledSample>,
    pub split: Split,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn new(samples: Vec<LabeledSample>, split: Split, seed: u64) -> Result<Self> {
        if let Some(first) = samples.first() {
            let n = first.state.n_qubits();
            for s in &samples {
                if s.state.n_qubits() != n {
                    return Err(Error::DimensionMismatch {
                        left: n,
                        right: s.state.n_qubits(),
                    });
                }
                if s.label > 1 {
                    return Err(Error::Domain(format!("label {} outside {{0,1}}", s.label)));
                }
            }
        }
        Ok(Self {
            samples,
            split,
            seed,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.samples.first().map(|s| s.state.n_qubits())
    }

    pub fn states(&self) -> impl Iterator<Item = &StateVector> {
        self.samples.iter().map(|s| &s.state)
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let ones = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - ones, ones]
    }

    /// Dataset restricted to the first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            samples: self.samples[..n.min(self.samples.len())].to_vec(),
            split: self.split,
            seed: self.seed,
        }
    }

    pub fn to_text(&self) -> String {
        let mut d = Document::new(DATASET_MAGIC);
        d.set("split", self.split.as_str());
        d.set("seed", self.seed);
        d.set("n_samples", self.samples.len());
        d.set("n_qubits", self.n_qubits().unwrap_or(0));
        let lines = self
            .samples
            .iter()
            .map(|s| {
                let meta = match s.meta {
                    SampleMeta::Ising { j_x } => format!("ising:{}", fmt_f64(j_x)),
                    SampleMeta::Digit { digit, index } => format!("digit:{digit}:{index}"),
                };
                let mut line = format!("{} {meta}", s.label);
                for a in s.state.amplitudes() {
                    line.push(' ');
                    line.push_str(&fmt_f64(a.re));
                    line.push(' ');
                    line.push_str(&fmt_f64(a.im));
                }
                line
            })
            .collect();
        d.section("samples", lines);
        d.render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let d = Document::parse(text, DATASET_MAGIC)?;
        let split = match d.require("split")? {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::parse("split", format!("unknown `{other}`"))),
        };
        let seed = parse_u64("seed", d.require("seed")?)?;
        let n_samples = parse_usize("n_samples", d.require("n_samples")?)?;
        let n_qubits = parse_usize("n_qubits", d.require("n_qubits")?)?;
        let lines = &d.find_section("samples")?.lines;
        if lines.len() != n_samples {
            return Err(Error::parse(
                "n_samples",
                format!("declared {n_samples}, found {}", lines.len()),
            ));
        }
        let samples = lines
            .iter()
            .map(|line| parse_sample_line(line, n_qubits))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, split, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

pub const DATASET_MAGIC: &str = "qadv-dataset v1";

fn parse_sample_line(line: &str, n_qubits: usize) -> Result<LabeledSample> {
    let mut it = line.split_whitespace();
    let label = it
        .next()
        .ok_or_else(|| Error::parse("label", "empty sample line"))?;
    let label = match label {
        "0" => 0,
        "1" => 1,
        other => return Err(Error::parse("label", format!("`{other}`"))),
    };
    let meta_text = it.next().ok_or_else(|| Error::parse("meta", "missing"))?;
    let meta = match meta_text.split(':').collect::<Vec<_>>().as_slice() {
        ["ising", j] => SampleMeta::Ising {
            j_x: parse_f64("meta", j)?,
        },
        ["digit", digit, index] => SampleMeta::Digit {
            digit: digit
                .parse()
                .map_err(|_| Error::parse("meta", format!("bad digit `{digit}`")))?,
            index: parse_usize("meta", index)?,
        },
        _ => return Err(Error::parse("meta", format!("`{meta_text}`"))),
    };
    let values = it
        .map(|v| parse_f64("amplitudes", v))
        .collect::<Result<Vec<f64>>>()?;
    let dim = 1usize << n_qubits;
    if values.len() != 2 * dim {
        return Err(Error::parse(
            "amplitudes",
            format!("expected {} values, found {}", 2 * dim, values.len()),
        ));
    }
    let amps = values
        .chunks_exact(2)
        .map(|p| C64::new(p[0], p[1]))
        .collect();
    Ok(LabeledSample {
        state: StateVector::new(n_qubits, amps)?,
        label,
        meta,
    })
}

/// One raw grayscale image with its digit label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl RawImage {
    pub fn as_28x28(&self) -> Result<&[u8; IMAGE_SIDE * IMAGE_SIDE]> {
        self.pixels.as_slice().try_into().map_err(|_| {
            Error::Encoding(format!(
                "expected a 28x28 image, found {}x{}",
                self.rows, self.cols
            ))
        })
    }
}

struct IdxReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl IdxReader<'_> {
    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| Error::parse(field, "truncated header"))?;
        self.pos += 4;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn rest(&self) -> &[u8] {
        &self.bytes[self.pos..]
    }
}

/// Reads an IDX image file and its label file.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<RawImage>> {
    parse_mnist_idx(&fs::read(images_path)?, &fs::read(labels_path)?)
}

pub fn parse_mnist_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Vec<RawImage>> {
    let mut img = IdxReader {
        bytes: image_bytes,
        pos: 0,
    };
    let magic = img.u32("images.magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(
            "images.magic",
            format!("expected 0x00000803, found {magic:#010x}"),
        ));
    }
    let count = img.u32("images.count")? as usize;
    let rows = img.u32("images.rows")? as usize;
    let cols = img.u32("images.cols")? as usize;
    let size = rows * cols;
    if img.rest().len() != count * size {
        return Err(Error::parse(
            "images.data",
            format!(
                "expected {} bytes, found {}",
                count * size,
                img.rest().len()
            ),
        ));
    }

    let mut lab = IdxReader {
        bytes: label_bytes,
        pos: 0,
    };
    let magic = lab.u32("labels.magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(
            "labels.magic",
            format!("expected 0x00000801, found {magic:#010x}"),
        ));
    }
    let label_count = lab.u32("labels.count")? as usize;
    if label_count != count {
        return Err(Error::parse(
            "labels.count",
            format!("{label_count} labels for {count} images"),
        ));
    }
    if lab.rest().len() != count {
        return Err(Error::parse(
            "labels.data",
            format!("expected {count} bytes, found {}", lab.rest().len()),
        ));
    }

    Ok(img
        .rest()
        .chunks_exact(size.max(1))
        .take(count)
        .zip(lab.rest())
        .map(|(px, &label)| RawImage {
            rows,
            cols,
            pixels: px.to_vec(),
            label,
        })
        .collect())
}

/// Serializes images to the IDX pair format (inverse of [`parse_mnist_idx`]).
pub fn encode_mnist_idx(images: &[RawImage]) -> Result<(Vec<u8>, Vec<u8>)> {
    let (rows, cols) = images
        .first()
        .map_or((IMAGE_SIDE, IMAGE_SIDE), |i| (i.rows, i.cols));
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lab = Vec::with_capacity(8 + images.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(images.len() as u32).to_be_bytes());
    for im in images {
        if im.rows != rows || im.cols != cols || im.pixels.len() != rows * cols {
            return Err(Error::Encoding("images must share one shape".into()));
        }
        img.extend_from_slice(&im.pixels);
        lab.push(im.label);
    }
    Ok((img, lab))
}

pub fn write_mnist_idx(images_path: &Path, labels_path: &Path, images: &[RawImage]) -> Result<()> {
    let (img, lab) = encode_mnist_idx(images)?;
    fs::write(images_path, img)?;
    fs::write(labels_path, lab)?;
    Ok(())
}

/// Overlap of the unit cell `[i, i+1)` with `[lo, hi)`.
fn overlap(i: usize, lo: f64, hi: f64) -> f64 {
    let a = (i as f64).max(lo);
    let b = ((i + 1) as f64).min(hi);
    (b - a).max(0.0)
}

/// Area-weighted 28x28 -> 16x16 downsampling, scaled to `[0, 1]`.
pub fn resize_16(image: &[u8; IMAGE_SIDE * IMAGE_SIDE]) -> Vec<f64> {
    let cell = IMAGE_SIDE as f64 / RESIZED_SIDE as f64;
    let weights: Vec<Vec<(usize, f64)>> = (0..RESIZED_SIDE)
        .map(|o| {
            let (lo, hi) = (o as f64 * cell, (o + 1) as f64 * cell);
            (lo.floor() as usize..(hi.ceil() as usize).min(IMAGE_SIDE))
                .map(|i| (i, overlap(i, lo, hi)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let area = cell * cell;
    let mut out = vec![0.0; RESIZED_SIDE * RESIZED_SIDE];
    for (r, wr) in weights.iter().enumerate() {
        for (c, wc) in weights.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, a) in wr {
                for &(j, b) in wc {
                    acc += a * b * f64::from(image[i * IMAGE_SIDE + j]);
                }
            }
            out[r * RESIZED_SIDE + c] = acc / area / 255.0;
        }
    }
    out
}

/// Pads to the next power of two with zeros and normalizes.
pub fn amplitude_encode(v: &[f64]) -> Result<StateVector> {
    if v.is_empty() {
        return Err(Error::Encoding("empty vector".into()));
    }
    let dim = v.len().next_power_of_two();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Encoding(
            "vector has zero (or non-finite) norm".into(),
        ));
    }
    let mut amps: Vec<C64> = v.iter().map(|&x| C64::new(x / norm, 0.0)).collect();
    amps.resize(dim, C64::new(0.0, 0.0));
    StateVector::new(dim.trailing_zeros() as usize, amps)
}

fn check_chain_length(l: usize) -> Result<()> {
    if !(2..=14).contains(&l) {
        return Err(Error::Domain(format!("chain length {l} outside 2..=14")));
    }
    Ok(())
}

fn check_field(j_x: f64) -> Result<()> {
    if !(j_x >= 0.0 && j_x.is_finite()) {
        return Err(Error::Domain(format!(
            "transverse field {j_x} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// `-sum_i Z_i Z_{i+1}` for basis state `index` of an open chain.
fn zz_energy(index: usize, l: usize) -> f64 {
    let bonds = (index ^ (index >> 1)) & ((1 << (l - 1)) - 1);
    let anti = bonds.count_ones() as f64;
    -((l - 1) as f64 - 2.0 * anti)
}

/// Dense `H = -sum Z_i Z_{i+1} - J_x sum X_i` on an open chain.
pub fn build_ising_hamiltonian(l: usize, j_x: f64) -> Result<DMatrix<f64>> {
    check_chain_length(l)?;
    check_field(j_x)?;
    let dim = 1usize << l;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = zz_energy(i, l);
        for k in 0..l {
            h[(i ^ (1 << k), i)] -= j_x;
        }
    }
    Ok(h)
}

/// Ground energy and state of the open-chain Ising model.
///
/// For `J_x > 0` the ground state is unique, has positive amplitudes and is
/// even under the global spin flip, so it is obtained by diagonalizing the
/// Hamiltonian restricted to the flip-even sector, spanned by
/// `(|i> + |~i>)/sqrt 2` for indices `i` with the leading bit clear. This
/// avoids the exponentially small gap to the odd sector at weak field.
pub fn ising_ground_state(l: usize, j_x: f64) -> Result<(f64, StateVector)> {
    check_chain_length(l)?;
    check_field(j_x)?;
    if j_x == 0.0 {
        return Err(Error::Degenerate(
            "J_x = 0 has two degenerate ferromagnetic ground states".into(),
        ));
    }
    let dim = 1usize << l;
    let half = dim / 2;
    let all = dim - 1;
    let mut block = DMatrix::zeros(half, half);
    for i in 0..half {
        block[(i, i)] = zz_energy(i, l);
        for k in 0..l {
            let f = i ^ (1 << k);
            let rep = if f < half { f } else { f ^ all };
            block[(rep, i)] -= j_x;
        }
    }
    let eig = SymmetricEigen::new(block);
    let (k, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v = eig.eigenvectors.column(k);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for i in 0..half {
        amps[i] = C64::new(v[i] * s, 0.0);
        amps[i ^ all] = C64::new(v[i] * s, 0.0);
    }
    let (imax, _) = amps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("non-empty state");
    if amps[imax].re < 0.0 {
        for a in &mut amps {
            *a = -*a;
        }
    }
    Ok((energy, StateVector::normalized(amps)?))
}

/// Ground energy from the Jordan-Wigner free-fermion form: half the sum of
/// the negative eigenvalues of the `2L x 2L` Bogoliubov-de Gennes matrix.
pub fn free_fermion_ground_energy(l: usize, j_x: f64) -> Result<f64> {
    check_chain_length(l)?;
    check_field(j_x)?;
    let mut a = DMatrix::<f64>::zeros(l, l);
    let mut b = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        a[(i, i)] = 2.0 * j_x;
        if i + 1 < l {
            a[(i, i + 1)] = -1.0;
            a[(i + 1, i)] = -1.0;
            b[(i, i + 1)] = -1.0;
            b[(i + 1, i)] = 1.0;
        }
    }
    let mut m = DMatrix::<f64>::zeros(2 * l, 2 * l);
    m.view_mut((0, 0), (l, l)).copy_from(&a);
    m.view_mut((0, l), (l, l)).copy_from(&b);
    m.view_mut((l, 0), (l, l)).copy_from(&(-&b));
    m.view_mut((l, l), (l, l)).copy_from(&(-&a));
    let eig = SymmetricEigen::new(m);
    Ok(0.5 * eig.eigenvalues.iter().filter(|&&e| e < 0.0).sum::<f64>())
}

/// `0` on the ferromagnetic side (`J_x < 1`), `1` on the paramagnetic side.
pub fn ising_label(j_x: f64) -> u8 {
    u8::from(j_x > 1.0)
}

/// Draws `n` couplings uniformly from `(0, 2)` minus the critical window.
pub fn sample_couplings<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let j: f64 = rng.random::<f64>() * 2.0;
        if j > 0.0 && !(j > CRITICAL_WINDOW.0 && j < CRITICAL_WINDOW.1) {
            out.push(j);
        }
    }
    out
}

/// Ground-state dataset for explicit couplings, computed in parallel.
pub fn ising_dataset_from_couplings(
    l: usize,
    couplings: &[f64],
    split: Split,
    seed: u64,
) -> Result<LabeledDataset> {
    let samples = couplings
        .par_iter()
        .map(|&j_x| {
            let (_, state) = ising_ground_state(l, j_x)?;
            Ok(LabeledSample {
                state,
                label: ising_label(j_x),
                meta: SampleMeta::Ising { j_x },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(samples, split, seed)
}

/// Train and test sets of Ising ground states; couplings for both splits are
/// drawn from one seeded stream before any state is computed.
pub fn generate_ising_dataset(
    l: usize,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InsufficientData("split sizes must be >= 1".into()));
    }
    check_chain_length(l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_j = sample_couplings(&mut rng, n_train);
    let test_j = sample_couplings(&mut rng, n_test);
    Ok((
        ising_dataset_from_couplings(l, &train_j, Split::Train, seed)?,
        ising_dataset_from_couplings(l, &test_j, Split::Test, seed)?,
    ))
}

/// Resized, amplitude-encoded image.
pub fn encode_image(image: &RawImage) -> Result<StateVector> {
    amplitude_encode(&resize_16(image.as_28x28()?))
}

/// Balanced two-digit dataset: label 0 for `digits.0`, 1 for `digits.1`.
pub fn build_mnist_dataset(
    images: &[RawImage],
    digits: (u8, u8),
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if digits.0 == digits.1 {
        return Err(Error::Domain("digits must be distinct".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = |n: usize| [n - n / 2, n / 2];
    let (train_counts, test_counts) = (per_class(n_train), per_class(n_test));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, digit) in [digits.0, digits.1].into_iter().enumerate() {
        let mut pool: Vec<usize> = images
            .iter()
            .enumerate()
            .filter(|(_, im)| im.label == digit)
            .map(|(i, _)| i)
            .collect();
        let need = train_counts[label] + test_counts[label];
        if pool.len() < need {
            return Err(Error::InsufficientData(format!(
                "digit {digit}: need {need} images, found {}",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        let (tr, rest) = pool.split_at(train_counts[label]);
        train.extend(tr.iter().map(|&i| (i, label as u8)));
        test.extend(rest[..test_counts[label]].iter().map(|&i| (i, label as u8)));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let build = |picks: &[(usize, u8)], split| -> Result<LabeledDataset> {
        let samples = picks
            .par_iter()
            .map(|&(i, label)| {
                Ok(LabeledSample {
                    state: encode_image(&images[i])?,
                    label,
                    meta: SampleMeta::Digit {
                        digit: images[i].label,
                        index: i,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, split, seed)
    };
    Ok((build(&train, Split::Train)?, build(&test, Split::Test)?))
}

/// Synthetic stand-in for two digit classes: noisy axis-aligned Gaussian
/// blobs whose shape depends on the class (a tall stroke for the first
/// digit, a round upper blob on a short stem for the second).
pub fn synthetic_digit_images(digits: (u8, u8), per_class: usize, seed: u64) -> Vec<RawImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1.0).expect("valid normal");
    let noise = Normal::new(0.0, 12.0).expect("valid normal");
    let mut out = Vec::with_capacity(2 * per_class);
    for k in 0..2 * per_class {
        let first = k % 2 == 0;
        let dr = jitter.sample(&mut rng);
        let dc = jitter.sample(&mut rng);
        // (row, col, sigma_row, sigma_col) per blob.
        let blobs: Vec<(f64, f64, f64, f64)> = if first {
            vec![(14.0 + dr, 14.0 + dc, 7.0, 1.8)]
        } else {
            vec![
                (9.5 + dr, 13.5 + dc, 3.5, 3.5),
                (18.0 + dr, 16.0 + dc, 4.5, 1.5),
            ]
        };
        let pixels = (0..IMAGE_SIDE * IMAGE_SIDE)
            .map(|p| {
                let (r, c) = ((p / IMAGE_SIDE) as f64, (p % IMAGE_SIDE) as f64);
                let ink: f64 = blobs
                    .iter()
                    .map(|&(r0, c0, sr, sc)| {
                        (-0.5 * (((r - r0) / sr).powi(2) + ((c - c0) / sc).powi(2))).exp()
                    })
                    .fold(0.0, f64::max);
                (255.0 * ink + noise.sample(&mut rng))
                    .clamp(0.0, 255.0)
                    .round() as u8
            })
            .collect();
        out.push(RawImage {
            rows: IMAGE_SIDE,
            cols: IMAGE_SIDE,
            pixels,
            label: if first { digits.0 } else { digits.1 },
        });
    }
    out
}

/// Global spin-flip expectation `<psi| prod_i X_i |psi>`.
pub fn spin_flip_parity(state: &StateVector) -> f64 {
    let a = state.amplitudes();
    let all = a.len() - 1;
    a.iter()
        .enumerate()
        .map(|(i, x)| (x.conj() * a[i ^ all]).re)
        .sum()
}
