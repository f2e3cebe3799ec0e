use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::stream;
use crate::error::{Error, Result};

/// Homogeneous PPP on the disc of the given radius centred at the origin.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    if !(density >= 0.0 && density.is_finite()) || !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::argument(
            "sample_ppp",
            format!("need density >= 0 and radius >= 0, got {density}, {radius}"),
        ));
    }
    let n = poisson(density * PI * radius * radius, rng);
    Ok((0..n).map(|_| uniform_in_disc(radius, rng)).collect())
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

pub(crate) fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let t = 2.0 * PI * rng.random::<f64>();
    [r * t.cos(), r * t.sin()]
}

/// Ring width used for nested PPP generation; a window of radius W contains
/// exactly the points a window of radius 2W generates inside W.
pub(crate) const RING_WIDTH: f64 = 250.0;

/// PPP on the disc of `radius`, generated ring by ring from keyed streams.
/// Returns (x, y, key) where key identifies the point across window sizes.
pub(crate) fn ring_ppp(density: f64, radius: f64, parts: &[u64]) -> Vec<(f64, f64, u64)> {
    let mut out = Vec::new();
    if !(density > 0.0) {
        return out;
    }
    let rings = (radius / RING_WIDTH).ceil() as u64;
    let mut key_parts = parts.to_vec();
    key_parts.push(0);
    for i in 0..rings {
        *key_parts.last_mut().unwrap() = i;
        let mut rng = stream::rng(&key_parts);
        let (a, b) = (i as f64 * RING_WIDTH, (i + 1) as f64 * RING_WIDTH);
        let n = poisson(density * PI * (b * b - a * a), &mut rng);
        for idx in 0..n as u64 {
            let r = (a * a + rng.random::<f64>() * (b * b - a * a)).sqrt();
            let t = 2.0 * PI * rng.random::<f64>();
            if r <= radius {
                out.push((r * t.cos(), r * t.sin(), (i << 32) | idx));
            }
        }
    }
    out
}

/// Uniform bucket grid over the square [−half, half]² (compressed rows).
pub(crate) struct Grid {
    half: f64,
    cell: f64,
    n: usize,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    pub(crate) fn new(points: impl Iterator<Item = (f64, f64)> + Clone, half: f64, cell: f64) -> Self {
        let n = ((2.0 * half / cell).ceil() as usize).max(1);
        let mut g = Grid {
            half,
            cell,
            n,
            start: vec![0; n * n + 1],
            items: Vec::new(),
        };
        let cells: Vec<usize> = points.map(|(x, y)| g.index(x, y)).collect();
        for &c in &cells {
            g.start[c + 1] += 1;
        }
        for c in 0..n * n {
            g.start[c + 1] += g.start[c];
        }
        let mut fill = g.start.clone();
        g.items = vec![0; cells.len()];
        for (i, &c) in cells.iter().enumerate() {
            g.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        g
    }

    fn coord(&self, v: f64) -> usize {
        // the cast truncates, which is floor on the clamped value
        (((v + self.half) / self.cell).max(0.0) as usize).min(self.n - 1)
    }

    fn index(&self, x: f64, y: f64) -> usize {
        self.coord(y) * self.n + self.coord(x)
    }

    /// Whether `pred` holds for some item in cells meeting the square of
    /// half-side r around (x, y). Cells are tried nearest first.
    pub(crate) fn any(&self, x: f64, y: f64, r: f64, mut pred: impl FnMut(u32) -> bool) -> bool {
        let (cx0, cy0) = (self.coord(x) as isize, self.coord(y) as isize);
        let (x0, x1) = (self.coord(x - r) as isize, self.coord(x + r) as isize);
        let (y0, y1) = (self.coord(y - r) as isize, self.coord(y + r) as isize);
        let rings = (cx0 - x0).max(x1 - cx0).max(cy0 - y0).max(y1 - cy0);
        for ring in 0..=rings {
            for cy in (cy0 - ring).max(y0)..=(cy0 + ring).min(y1) {
                let edge = cy == cy0 - ring || cy == cy0 + ring;
                let step = if edge { 1 } else { (2 * ring).max(1) };
                let mut cx = cx0 - ring;
                while cx <= cx0 + ring {
                    if cx >= x0 && cx <= x1 {
                        let c = cy as usize * self.n + cx as usize;
                        for &i in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
                            if pred(i) {
                                return true;
                            }
                        }
                    }
                    cx += step;
                }
            }
        }
        false
    }

    /// Calls `f` for every item in cells meeting the square of half-side r
    /// around (x, y). Callers filter by exact distance.
    pub(crate) fn visit(&self, x: f64, y: f64, r: f64, mut f: impl FnMut(u32)) {
        let (x0, x1) = (self.coord(x - r), self.coord(x + r));
        let (y0, y1) = (self.coord(y - r), self.coord(y + r));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let c = cy * self.n + cx;
                for &i in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
                    f(i);
                }
            }
        }
    }
}
