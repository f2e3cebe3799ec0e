use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Probability mass allowed to be dropped from the far tails of a
    /// distribution when a finite integration range is chosen.
    pub tail_cut_probability: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_cut_probability: 1e-10,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::config("quad.tolerance", "tolerances must be positive"));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::config("quad.max_subdivisions", "must be >= 8"));
        }
        if !(self.tail_cut_probability > 0.0 && self.tail_cut_probability < 1e-6) {
            return Err(Error::config(
                "quad.tail_cut_probability",
                "must lie in (0, 1e-6)",
            ));
        }
        Ok(())
    }

    /// Same spec with both tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadSpec {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule on [-1, 1].
pub(crate) const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

pub(crate) const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_260_340,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, bool) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for i in 0..10 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        resk += WGK[i] * (f1 + f2);
        resabs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            resg += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for i in 0..10 {
        resasc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }
    let h = h.abs();
    let value = resk * h;
    let resabs = resabs * h;
    let resasc = resasc * h;
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err, value.is_finite() && err.is_finite())
}

/// Adaptive Gauss–Kronrod quadrature over [a, b] with extra initial breakpoints.
///
/// `points` must be sorted; points outside (a, b) are ignored.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    spec: &QuadSpec,
) -> Result<QuadResult> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::argument(
            "integrate_1d",
            format!("need finite a < b, got [{a}, {b}]"),
        ));
    }
    let mut edges = vec![a];
    edges.extend(points.iter().copied().filter(|&p| p > a && p < b));
    edges.push(b);

    let mut heap = BinaryHeap::with_capacity(edges.len() + 64);
    let mut evaluations = 0;
    for w in edges.windows(2) {
        if !(w[1] > w[0]) {
            continue;
        }
        let (value, error, ok) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        if !ok {
            return Err(non_finite(w[0], w[1]));
        }
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let mut subdivisions = heap.len();
    let (mut run_total, mut run_err) = totals(&heap);
    loop {
        if run_err <= spec.abs_tol.max(spec.rel_tol * run_total.abs()) {
            let (total, err) = totals(&heap);
            if err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
                return Ok(QuadResult {
                    value: total,
                    error: err,
                    evaluations,
                });
            }
            run_total = total;
            run_err = err;
        }
        let (total, err) = (run_total, run_err);
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NoConvergence {
                op: "integrate_1d",
                estimate: total,
                error_bound: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // cannot split any further in floating point
            return Err(Error::NoConvergence {
                op: "integrate_1d",
                estimate: total,
                error_bound: err,
            });
        }
        run_total -= worst.value;
        run_err -= worst.error;
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error, ok) = gk21(&mut f, lo, hi);
            evaluations += 21;
            if !ok {
                return Err(non_finite(lo, hi));
            }
            run_total += value;
            run_err += error;
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
        subdivisions += 1;
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    // summed in position order so the result does not depend on heap layout
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

fn non_finite(a: f64, b: f64) -> Error {
    Error::argument(
        "integrate_1d",
        format!("integrand not finite on [{a:e}, {b:e}]"),
    )
}

/// Adaptive quadrature of `f` over [a, b].
pub fn integrate_1d<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<f64> {
    integrate_with_breakpoints(f, a, b, &[], spec).map(|r| r.value)
}

/// ∫_a^∞ f, through y = a + t/(1−t) on t ∈ [0, 1).
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(f: F, a: f64, spec: &QuadSpec) -> Result<f64> {
    integrate_semi_infinite_scaled(f, a, 1.0, spec).map(|r| r.value)
}

/// ∫_a^∞ f through y = a + s·t/(1−t); `scale` s should match the width of the bulk of f.
pub fn integrate_semi_infinite_scaled<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    spec: &QuadSpec,
) -> Result<QuadResult> {
    if !a.is_finite() || !(scale > 0.0) {
        return Err(Error::argument(
            "integrate_semi_infinite",
            "lower limit must be finite and scale positive",
        ));
    }
    let g = |t: f64| {
        let u = 1.0 - t;
        let y = a + scale * t / u;
        if !y.is_finite() {
            return 0.0;
        }
        let v = f(y);
        if v == 0.0 {
            0.0
        } else {
            v * scale / (u * u)
        }
    };
    integrate_with_breakpoints(g, 0.0, 1.0, &[], spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let s = QuadSpec::default();
        assert!((integrate_1d(|x| x, 0.0, 1.0, &s).unwrap() - 0.5).abs() < 1e-15);
        assert!((integrate_1d(|x| 3.0 * x * x, 0.0, 1.0, &s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_singularity() {
        let s = QuadSpec::default();
        let v = integrate_1d(|x| 1.0 / x.sqrt(), 0.0, 1.0, &s).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reports_non_convergence() {
        let s = QuadSpec {
            max_subdivisions: 8,
            ..QuadSpec::default()
        };
        let e = integrate_1d(|x| (1.0 / x).sin() / x, 1e-6, 1.0, &s).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { .. }));
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integrate_1d(|x| x, 1.0, 0.0, &QuadSpec::default()).is_err());
    }
}
