//! Seeded blocks-world generator with an oracle describer and identifier.
//!
//! Scenes use unit coordinates with y pointing down, the same convention as
//! image rows, so block geometry maps one-to-one onto [`RawFeatures`].

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Corpus;
use crate::features::{hsl_to_rgb, EnvStats, RawFeatures};
use crate::lexicon::{Channel, Description, Lexicon};
use crate::model::{Environment, SceneBlock, SceneObject};
use crate::pnm::{GrayImage, RgbImage};
use crate::training::IdentificationTask;
use crate::{Error, Result};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
const MAX_SEED_RETRIES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedColor {
    Red,
    Green,
    Blue,
    Yellow,
    White,
}

impl NamedColor {
    pub const ALL: [NamedColor; 5] = [
        NamedColor::Red,
        NamedColor::Green,
        NamedColor::Blue,
        NamedColor::Yellow,
        NamedColor::White,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedColor::Red => "red",
            NamedColor::Green => "green",
            NamedColor::Blue => "blue",
            NamedColor::Yellow => "yellow",
            NamedColor::White => "white",
        }
    }

    /// Nominal hue in turns; `None` for the achromatic white.
    pub fn hue(self) -> Option<f64> {
        match self {
            NamedColor::Red => Some(0.0),
            NamedColor::Yellow => Some(1.0 / 6.0),
            NamedColor::Green => Some(1.0 / 3.0),
            NamedColor::Blue => Some(2.0 / 3.0),
            NamedColor::White => None,
        }
    }
}

/// One block in scene-relative units.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub center: (f64, f64),
    pub width: f64,
    pub height: f64,
    pub color: NamedColor,
    /// Jittered hue in turns (0 for white).
    pub hue: f64,
    pub sat: f64,
    pub light: f64,
}

impl BlockSpec {
    pub fn rgb(&self) -> [u8; 3] {
        hsl_to_rgb(self.hue, self.sat, self.light)
    }

    pub fn raw_features(&self) -> RawFeatures {
        RawFeatures {
            x_pos: self.center.0,
            y_pos: self.center.1,
            width: self.width,
            height: self.height,
            size: self.width * self.height,
            hue: self.hue,
            light: self.light,
            achromatic: self.color == NamedColor::White,
        }
    }

    fn x0(&self) -> f64 {
        self.center.0 - self.width / 2.0
    }

    fn y0(&self) -> f64 {
        self.center.1 - self.height / 2.0
    }

    fn overlap_area(&self, other: &BlockSpec) -> f64 {
        let ox = (self.x0() + self.width).min(other.x0() + other.width) - self.x0().max(other.x0());
        let oy = (self.y0() + self.height).min(other.y0() + other.height) - self.y0().max(other.y0());
        ox.max(0.0) * oy.max(0.0)
    }

    /// Gap-padded intersection test.
    fn clashes(&self, other: &BlockSpec, gap: f64) -> bool {
        (self.center.0 - other.center.0).abs() < (self.width + other.width) / 2.0 + gap
            && (self.center.1 - other.center.1).abs() < (self.height + other.height) / 2.0 + gap
    }

    pub fn inside(&self, margin: f64) -> bool {
        self.x0() >= margin
            && self.y0() >= margin
            && self.x0() + self.width <= 1.0 - margin
            && self.y0() + self.height <= 1.0 - margin
    }
}

/// Oracle membership grades μ_σ(o) ∈ [0, 1], objects × lexicon symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTruth {
    pub grades: Vec<Vec<f64>>,
}

impl OracleTruth {
    pub fn n_objects(&self) -> usize {
        self.grades.len()
    }

    /// min over the description's symbols; 1 for the empty description.
    pub fn joint(&self, o: usize, desc: &Description) -> f64 {
        desc.iter().map(|s| self.grades[o][s]).fold(1.0, f64::min)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Absolute reference point and spread per scalar channel.
fn reference(c: Channel) -> (f64, f64) {
    match c {
        Channel::XPos | Channel::YPos => (0.5, 0.2),
        Channel::Width => (0.12, 0.05),
        Channel::Height => (0.15, 0.06),
        Channel::Size => (0.016, 0.01),
        Channel::Light => (0.5, 0.2),
        Channel::Hue => (0.0, 1.0),
    }
}

/// Contextual position of an object on a channel: half absolute, half
/// relative to the other objects.
pub fn contextual_score(c: Channel, raw: &RawFeatures, stats: &EnvStats) -> f64 {
    let (r, spread) = reference(c);
    let v = raw.channel(c);
    0.5 * (v - r) / spread + 0.5 * stats.zscore(c, v)
}

const POLAR_OFFSET: f64 = 0.35;
const POLAR_TEMP: f64 = 0.12;
const HUE_WIDTH: f64 = 0.07;

/// Membership grade of one object for a symbol named `name`.
pub fn grade(name: &str, raw: &RawFeatures, stats: &EnvStats) -> f64 {
    let polar = |c: Channel, sign: f64| {
        sigmoid((sign * contextual_score(c, raw, stats) - POLAR_OFFSET) / POLAR_TEMP)
    };
    let chroma = |color: NamedColor| {
        if raw.achromatic {
            return 0.0;
        }
        let nominal = color.hue().unwrap_or(0.0);
        let d = (raw.hue - nominal).rem_euclid(1.0);
        let d = d.min(1.0 - d);
        (-(d / HUE_WIDTH).powi(2)).exp()
    };
    match name {
        "left" => polar(Channel::XPos, -1.0),
        "right" => polar(Channel::XPos, 1.0),
        "top" => polar(Channel::YPos, -1.0),
        "bottom" => polar(Channel::YPos, 1.0),
        "thin" => polar(Channel::Width, -1.0),
        "wide" => polar(Channel::Width, 1.0),
        "short" => polar(Channel::Height, -1.0),
        "tall" => polar(Channel::Height, 1.0),
        "small" => polar(Channel::Size, -1.0),
        "big" => polar(Channel::Size, 1.0),
        "red" => chroma(NamedColor::Red),
        "green" => chroma(NamedColor::Green),
        "blue" => chroma(NamedColor::Blue),
        "yellow" => chroma(NamedColor::Yellow),
        "white" => sigmoid((raw.light - 0.78) / 0.04),
        _ => 0.0,
    }
}

/// Grades every object of an environment against every lexicon symbol.
pub fn oracle_truth(env: &Environment, lex: &Lexicon) -> OracleTruth {
    let stats = env.stats();
    OracleTruth {
        grades: env
            .objects
            .iter()
            .map(|o| {
                lex.symbols()
                    .iter()
                    .map(|s| grade(&s.name, &o.features, &stats))
                    .collect()
            })
            .collect(),
    }
}

/// Objects whose joint grade reaches 0.5, or failing that, those within 0.1
/// of the best joint grade. Never empty.
pub fn oracle_select(truth: &OracleTruth, desc: &Description) -> Vec<usize> {
    let joint: Vec<f64> = (0..truth.n_objects()).map(|o| truth.joint(o, desc)).collect();
    select_from_joint(&joint)
}

fn select_from_joint(joint: &[f64]) -> Vec<usize> {
    let crisp: Vec<usize> = (0..joint.len()).filter(|&o| joint[o] >= 0.5).collect();
    if !crisp.is_empty() {
        return crisp;
    }
    let best = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..joint.len()).filter(|&o| joint[o] >= best - 0.1).collect()
}

/// As [`oracle_select`] with independent Gaussian noise on every grade.
pub fn oracle_select_noisy<R: Rng>(truth: &OracleTruth, desc: &Description, sigma: f64, rng: &mut R) -> Vec<usize> {
    if sigma <= 0.0 {
        return oracle_select(truth, desc);
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let joint: Vec<f64> = (0..truth.n_objects())
        .map(|o| {
            desc.iter()
                .map(|s| truth.grades[o][s] + normal.sample(rng))
                .fold(1.0, f64::min)
        })
        .collect();
    select_from_joint(&joint)
}

/// Object-count and size knobs per category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryShape {
    pub min_objects: usize,
    pub max_objects: usize,
    pub width: (f64, f64),
    pub height: (f64, f64),
}

pub fn default_shape(category: u8) -> CategoryShape {
    let (min_objects, max_objects, width, height) = match category {
        1 => (3, 3, (0.08, 0.18), (0.08, 0.25)),
        2 => (4, 6, (0.05, 0.25), (0.05, 0.3)),
        3 => (5, 7, (0.06, 0.2), (0.06, 0.25)),
        4 => (5, 8, (0.06, 0.2), (0.06, 0.22)),
        _ => (12, 16, (0.04, 0.12), (0.04, 0.12)),
    };
    CategoryShape {
        min_objects,
        max_objects,
        width,
        height,
    }
}

const MARGIN: f64 = 0.03;
const GAP: f64 = 0.01;

fn random_color_props<R: Rng>(color: NamedColor, rng: &mut R) -> (f64, f64, f64) {
    match color.hue() {
        Some(h) => {
            let hue = (h + rng.random_range(-0.025..0.025)).rem_euclid(1.0);
            (hue, rng.random_range(0.65..0.9), rng.random_range(0.42..0.58))
        }
        None => (0.0, 0.0, rng.random_range(0.88..0.96)),
    }
}

fn block_with<R: Rng>(center: (f64, f64), width: f64, height: f64, color: NamedColor, rng: &mut R) -> BlockSpec {
    let (hue, sat, light) = random_color_props(color, rng);
    BlockSpec {
        center,
        width,
        height,
        color,
        hue,
        sat,
        light,
    }
}

/// Rejection-samples non-overlapping blocks with the given colours.
fn scatter<R: Rng>(colors: &[NamedColor], shape: &CategoryShape, rng: &mut R) -> Result<Vec<BlockSpec>> {
    let mut blocks: Vec<BlockSpec> = Vec::with_capacity(colors.len());
    let mut attempts = 0;
    for &color in colors {
        loop {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailure(MAX_PLACEMENT_ATTEMPTS));
            }
            let w = rng.random_range(shape.width.0..shape.width.1);
            let h = rng.random_range(shape.height.0..shape.height.1);
            let cx = rng.random_range(MARGIN + w / 2.0..1.0 - MARGIN - w / 2.0);
            let cy = rng.random_range(MARGIN + h / 2.0..1.0 - MARGIN - h / 2.0);
            let b = block_with((cx, cy), w, h, color, rng);
            if blocks.iter().all(|o| !b.clashes(o, GAP)) {
                blocks.push(b);
                break;
            }
        }
    }
    Ok(blocks)
}

fn layout<R: Rng>(category: u8, shape: &CategoryShape, rng: &mut R) -> Result<Vec<BlockSpec>> {
    let n = rng.random_range(shape.min_objects..=shape.max_objects);
    match category {
        1 => {
            // three differently coloured blocks side by side on one row
            let mut palette = NamedColor::ALL.to_vec();
            palette.shuffle(rng);
            let row = rng.random_range(0.3..0.7);
            let slot = 1.0 / n as f64;
            Ok((0..n)
                .map(|i| {
                    let w = rng.random_range(shape.width.0..shape.width.1);
                    let h = rng.random_range(shape.height.0..shape.height.1);
                    let cx = slot * (i as f64 + 0.5) + rng.random_range(-0.04..0.04);
                    let cy = row + rng.random_range(-0.05..0.05);
                    block_with((cx, cy), w, h, palette[i % palette.len()], rng)
                })
                .collect())
        }
        2 => {
            let color = *NamedColor::ALL.choose(rng).expect("non-empty");
            scatter(&vec![color; n], shape, rng)
        }
        3 => {
            let mut palette = NamedColor::ALL.to_vec();
            palette.shuffle(rng);
            let mut colors: Vec<NamedColor> = (0..n).map(|i| palette[i % 2]).collect();
            colors.shuffle(rng);
            scatter(&colors, shape, rng)
        }
        4 => {
            let mut palette = NamedColor::ALL.to_vec();
            palette.shuffle(rng);
            let k = rng.random_range(3..=4);
            let colors: Vec<NamedColor> = (0..n).map(|i| palette[i % k]).collect();
            scatter(&colors, shape, rng)
        }
        _ => {
            let colors: Vec<NamedColor> = (0..n)
                .map(|_| *NamedColor::ALL.choose(rng).expect("non-empty"))
                .collect();
            scatter(&colors, shape, rng)
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a root seed and a counter path.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(root), |acc, &p| mix(acc ^ mix(p)))
}

pub fn environment_from_blocks(id: &str, category: &str, blocks: &[BlockSpec]) -> Environment {
    let objects = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| SceneObject {
            id: format!("b{}", i + 1),
            features: b.raw_features(),
        })
        .collect();
    let scene = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| SceneBlock {
            object_id: format!("b{}", i + 1),
            x: b.x0(),
            y: b.y0(),
            width: b.width,
            height: b.height,
            rgb: b.rgb(),
        })
        .collect();
    Environment {
        id: id.into(),
        category: category.into(),
        objects,
        scene: Some(scene),
    }
}

/// A generated environment together with its blocks and oracle grades.
#[derive(Debug, Clone)]
pub struct GeneratedEnv {
    pub env: Environment,
    pub blocks: Vec<BlockSpec>,
    pub truth: OracleTruth,
}

/// Deterministic in `(category, seed)`.
pub fn generate_environment(category: u8, seed: u64, lex: &Lexicon) -> Result<GeneratedEnv> {
    generate_environment_with(category, seed, &default_shape(category), lex)
}

pub fn generate_environment_with(
    category: u8,
    seed: u64,
    shape: &CategoryShape,
    lex: &Lexicon,
) -> Result<GeneratedEnv> {
    if !(1..=5).contains(&category) {
        return Err(Error::InvalidCategory(category));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = layout(category, shape, &mut rng)?;
    let env = environment_from_blocks(&format!("{category}"), &category.to_string(), &blocks);
    let truth = oracle_truth(&env, lex);
    Ok(GeneratedEnv { env, blocks, truth })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    /// Environment count for each of the five categories.
    pub envs_per_category: [usize; 5],
    pub descriptions_per_object: usize,
    pub replicas: usize,
    /// Standard deviation of the per-replica grade noise.
    pub noise: f64,
    pub seed: u64,
    pub shapes: [CategoryShape; 5],
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            envs_per_category: [5, 5, 5, 5, 2],
            descriptions_per_object: 5,
            replicas: 10,
            noise: 0.05,
            seed: 7,
            shapes: [1, 2, 3, 4, 5].map(default_shape),
        }
    }
}

/// Symbols with at least this grade are candidates for describing an object.
const DESCRIBE_GRADE: f64 = 0.6;
const DESCRIPTION_LENGTHS: [usize; 5] = [1, 2, 3, 1, 2];

/// Descriptions for one object, from single symbols up to three-symbol
/// conjunctions of its strongest attributes.
fn describe<R: Rng>(truth: &OracleTruth, o: usize, count: usize, rng: &mut R) -> Vec<Description> {
    let candidates: Vec<usize> = (0..truth.grades[o].len())
        .filter(|&s| truth.grades[o][s] >= DESCRIBE_GRADE)
        .collect();
    let mut out: Vec<Description> = Vec::new();
    if candidates.is_empty() {
        return out;
    }
    let mut tries = 0;
    while out.len() < count && tries < 8 * count {
        let len = DESCRIPTION_LENGTHS[tries % DESCRIPTION_LENGTHS.len()].min(candidates.len());
        tries += 1;
        let d = Description::from_indices(candidates.choose_multiple(rng, len).copied());
        if !out.contains(&d) {
            out.push(d);
        }
    }
    out
}

fn generate_group(spec: &CorpusSpec, lex: &Lexicon, category: u8, index: usize) -> Result<(GeneratedEnv, u64)> {
    let shape = &spec.shapes[category as usize - 1];
    for attempt in 0..MAX_SEED_RETRIES {
        let seed = derive_seed(spec.seed, &[category as u64, index as u64, attempt]);
        match generate_environment_with(category, seed, shape, lex) {
            Ok(mut g) => {
                g.env.id = format!("{category}.{}", index + 1);
                return Ok((g, seed));
            }
            Err(Error::PlacementFailure(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PlacementFailure(MAX_PLACEMENT_ATTEMPTS))
}

/// Builds a full corpus: environments per category, descriptions per object
/// and noisy oracle identifications per description.
pub fn generate_corpus(spec: &CorpusSpec, lex: &Lexicon) -> Result<Corpus> {
    if spec.descriptions_per_object == 0 || spec.replicas == 0 {
        return Err(Error::InvalidConfig("counts must be at least 1".into()));
    }
    let mut environments = Vec::new();
    let mut tasks = Vec::new();
    for category in 1..=5u8 {
        for index in 0..spec.envs_per_category[category as usize - 1] {
            let (g, seed) = generate_group(spec, lex, category, index)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::MAX]));
            for o in 0..g.env.len() {
                for desc in describe(&g.truth, o, spec.descriptions_per_object, &mut rng) {
                    for _ in 0..spec.replicas {
                        let sel = oracle_select_noisy(&g.truth, &desc, spec.noise, &mut rng);
                        let ids = sel.iter().map(|&i| g.env.objects[i].id.clone()).collect();
                        tasks.push(IdentificationTask::new(&g.env, desc.clone(), ids)?);
                    }
                }
            }
            environments.push(g.env);
        }
    }
    Ok(Corpus {
        environments,
        tasks,
    })
}

/// Paints blocks into a colour raster and a label mask (label = object index + 1).
/// A pixel belongs to a block when its centre lies inside the rectangle.
pub fn rasterize(env: &Environment, width: usize, height: usize) -> (RgbImage, GrayImage) {
    let mut img = RgbImage::new(width, height, [30, 30, 30]);
    let mut mask = GrayImage::new(width, height);
    let blocks = scene_blocks(env);
    for (label, b) in blocks.iter().enumerate() {
        let label = (label + 1).min(255) as u8;
        let px0 = ((b.x * width as f64) - 0.5).ceil().max(0.0) as usize;
        let py0 = ((b.y * height as f64) - 0.5).ceil().max(0.0) as usize;
        for py in py0..height {
            let cy = (py as f64 + 0.5) / height as f64;
            if cy >= b.y + b.height {
                break;
            }
            for px in px0..width {
                let cx = (px as f64 + 0.5) / width as f64;
                if cx >= b.x + b.width {
                    break;
                }
                img.put(px, py, b.rgb);
                mask.put(px, py, label);
            }
        }
    }
    (img, mask)
}

/// Scene rectangles in object order; derived from raw features when the
/// environment carries no scene block.
pub fn scene_blocks(env: &Environment) -> Vec<SceneBlock> {
    env.objects
        .iter()
        .map(|o| {
            if let Some(b) = env
                .scene
                .as_ref()
                .and_then(|s| s.iter().find(|b| b.object_id == o.id))
            {
                return b.clone();
            }
            let f = &o.features;
            let sat = if f.achromatic { 0.0 } else { 0.8 };
            SceneBlock {
                object_id: o.id.clone(),
                x: f.x_pos - f.width / 2.0,
                y: f.y_pos - f.height / 2.0,
                width: f.width,
                height: f.height,
                rgb: hsl_to_rgb(f.hue, sat, f.light),
            }
        })
        .collect()
}

/// Largest pairwise overlap as a fraction of the smaller block's area.
pub fn max_overlap_fraction(blocks: &[BlockSpec]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            let smaller = (a.width * a.height).min(b.width * b.height);
            worst = worst.max(a.overlap_area(b) / smaller);
        }
    }
    worst
}
