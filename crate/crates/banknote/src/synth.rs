//! Procedurally drawn geometric classes for desk-scale experiments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use banknote_core::rng::DetRng;
use banknote_core::train::Sample;
use banknote_core::Tensor;

use crate::error::{AppError, Result};
use crate::imageio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    Circle,
    Square,
    Triangle,
    Ring,
    Cross,
    HStripes,
    VStripes,
    Checker,
    Diagonal,
}

impl Pattern {
    pub const ALL: [Pattern; 9] = [
        Pattern::Circle,
        Pattern::Square,
        Pattern::Triangle,
        Pattern::Ring,
        Pattern::Cross,
        Pattern::HStripes,
        Pattern::VStripes,
        Pattern::Checker,
        Pattern::Diagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Circle => "circle",
            Pattern::Square => "square",
            Pattern::Triangle => "triangle",
            Pattern::Ring => "ring",
            Pattern::Cross => "cross",
            Pattern::HStripes => "hstripes",
            Pattern::VStripes => "vstripes",
            Pattern::Checker => "checker",
            Pattern::Diagonal => "diagonal",
        }
    }

    fn id(self) -> u64 {
        Pattern::ALL.iter().position(|&p| p == self).unwrap() as u64
    }

    fn is_texture(self) -> bool {
        matches!(
            self,
            Pattern::HStripes | Pattern::VStripes | Pattern::Checker | Pattern::Diagonal
        )
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = AppError;
    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| AppError::Usage(format!("unknown pattern {s:?}")))
    }
}

/// Parses a comma-separated pattern list.
pub fn parse_patterns(list: &str) -> Result<Vec<Pattern>> {
    let out: Vec<Pattern> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(AppError::Usage("empty pattern list".into()));
    }
    Ok(out)
}

/// Draws one `size×size×3` image of `pattern` with random placement,
/// orientation, colours and pixel noise.
pub fn render(pattern: Pattern, size: usize, rng: &mut DetRng) -> Tensor<f32> {
    let s = size as f64;
    let cx = rng.uniform(0.38, 0.62) * s;
    let cy = rng.uniform(0.38, 0.62) * s;
    let r = rng.uniform(0.22, 0.34) * s;
    let theta = if pattern.is_texture() {
        rng.uniform(-0.2, 0.2)
    } else {
        rng.uniform(0.0, std::f64::consts::TAU)
    };
    let period = rng.uniform(s / 8.0, s / 5.0);
    let phase = rng.uniform(0.0, period);
    let bg: [f64; 3] = [
        rng.uniform(0.0, 0.35),
        rng.uniform(0.0, 0.35),
        rng.uniform(0.0, 0.35),
    ];
    let fg: [f64; 3] = [
        rng.uniform(0.65, 1.0),
        rng.uniform(0.65, 1.0),
        rng.uniform(0.65, 1.0),
    ];
    let (sin, cos) = theta.sin_cos();
    let band = |t: f64| ((t + phase) / (period / 2.0)).floor().rem_euclid(2.0) == 0.0;
    let inside = |x: f64, y: f64| -> bool {
        let (dx, dy) = (x - cx, y - cy);
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        match pattern {
            Pattern::Circle => u * u + v * v <= r * r,
            Pattern::Square => u.abs() <= 0.8 * r && v.abs() <= 0.8 * r,
            Pattern::Triangle => (0..3).all(|k| {
                let a = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
                u * a.cos() + v * a.sin() <= 0.5 * r
            }),
            Pattern::Ring => {
                let d = (u * u + v * v).sqrt();
                d <= r && d >= 0.6 * r
            }
            Pattern::Cross => {
                let arm = 0.28 * r;
                (u.abs() <= arm && v.abs() <= r) || (v.abs() <= arm && u.abs() <= r)
            }
            Pattern::HStripes => band(v),
            Pattern::VStripes => band(u),
            Pattern::Checker => band(u) == band(v),
            Pattern::Diagonal => band((u + v) * std::f64::consts::FRAC_1_SQRT_2),
        }
    };
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let on = inside(x as f64 + 0.5, y as f64 + 0.5);
            for ch in 0..3 {
                let base = if on { fg[ch] } else { bg[ch] };
                data.push((base + 0.03 * rng.normal()).clamp(0.0, 1.0) as f32);
            }
        }
    }
    Tensor::new([size, size, 3], data).expect("shape matches data")
}

/// `per_class` images for every pattern, class-major; label = position in
/// `patterns`. Item `i` of a pattern depends only on `(seed, pattern, i)`.
pub fn generate(
    patterns: &[Pattern],
    per_class: usize,
    size: usize,
    seed: u64,
) -> Vec<Sample<f32>> {
    let mut out = Vec::with_capacity(patterns.len() * per_class);
    for (label, &p) in patterns.iter().enumerate() {
        for i in 0..per_class {
            let mut rng = DetRng::derived(seed, &[p.id(), i as u64]);
            out.push(Sample::new(render(p, size, &mut rng), label));
        }
    }
    out
}

/// Writes `root/<pattern>/<pattern>_<i>.png` for each generated image and
/// returns the number of files.
pub fn write_tree(
    root: &Path,
    patterns: &[Pattern],
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<usize> {
    let samples = generate(patterns, per_class, size, seed);
    for (k, s) in samples.iter().enumerate() {
        let name = patterns[s.label].name();
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        imageio::save_image(
            &dir.join(format!("{name}_{:04}.png", k % per_class)),
            &s.image,
        )?;
    }
    Ok(samples.len())
}
