//! Backward characteristics with diffuse reflection in a ball.
//!
//! A backward flight from `(x, v)` follows `x − ε t v` until it leaves the
//! domain at the hitting time `t_b`. At the hit point the velocity is
//! resampled from the diffuse boundary law `∝ μ(v) |v·n|` on `{v·n > 0}`,
//! which starts the next flight back into the domain. Chaining `k` flights
//! gives a stochastic cycle; [`estimate_exit_measure`] estimates the
//! probability that the accumulated time after `k` flights is still short.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::collision_core::params::CollisionParams;
use crate::error::{Error, Result};

/// Tolerance on `|v̂·n|` below which a boundary ray counts as grazing.
pub const GRAZING_TOL: f64 = 1e-10;
/// Velocity resamples allowed when a draw is grazing.
pub const MAX_GRAZING_RETRIES: usize = 100;

/// Shape of the spatial domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// A Euclidean ball.
    Ball,
}

/// A smooth convex domain (currently a ball).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexDomain {
    /// Shape.
    pub kind: DomainKind,
    /// Radius.
    pub radius: f64,
    /// Center.
    pub center: [f64; 3],
}

/// One stop of a stochastic cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StochasticTriple {
    /// Accumulated backward time.
    pub t: f64,
    /// Position (on the boundary for every triple after the start).
    pub x: [f64; 3],
    /// Velocity used for the next backward flight.
    pub v: [f64; 3],
}

/// Monte Carlo estimate of a probability with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    /// Point estimate `hits / samples`.
    pub estimate: f64,
    /// Lower end of the confidence interval.
    pub lower: f64,
    /// Upper end of the confidence interval.
    pub upper: f64,
    /// Number of samples in the event.
    pub hits: usize,
    /// Total number of samples.
    pub samples: usize,
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    /// Test statistic.
    pub statistic: f64,
    /// Degrees of freedom.
    pub dof: usize,
    /// Upper-tail p-value.
    pub p_value: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl ConvexDomain {
    /// A ball with the given center and radius.
    pub fn ball(center: [f64; 3], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("center must be finite".into()));
        }
        Ok(Self { kind: DomainKind::Ball, radius, center })
    }

    /// Checks the stored fields (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        Self::ball(self.center, self.radius).map(|_| ())
    }

    /// Signed distance-like level function `|x − c| − R`.
    pub fn level(&self, x: [f64; 3]) -> f64 {
        dot(sub(x, self.center), sub(x, self.center)).sqrt() - self.radius
    }

    /// Outward unit normal `(x − c)/R` at a boundary point.
    pub fn normal(&self, x: [f64; 3]) -> [f64; 3] {
        let d = sub(x, self.center);
        let r = dot(d, d).sqrt();
        [d[0] / r, d[1] / r, d[2] / r]
    }

    /// Projects a point onto the sphere along the radial direction.
    fn snap_to_boundary(&self, x: [f64; 3]) -> [f64; 3] {
        let n = self.normal(x);
        [
            self.center[0] + self.radius * n[0],
            self.center[1] + self.radius * n[1],
            self.center[2] + self.radius * n[2],
        ]
    }
}

/// Backward hitting time `t_b = inf{t > 0 : x − ε t v ∉ Ω}`.
///
/// Solves `|x − c − ε t v|² = R²` with the cancellation-free form of the
/// quadratic formula and returns the positive root. A point on the boundary
/// (within `10⁻¹²` relative) must satisfy `v·n > 0`, i.e. the backward ray
/// must enter the domain.
pub fn hitting_time(domain: &ConvexDomain, x: [f64; 3], v: [f64; 3], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let speed = dot(v, v).sqrt();
    if speed == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let r = domain.radius;
    let d = sub(x, domain.center);
    let level = dot(d, d).sqrt() - r;
    if level > 1e-12 * r {
        return Err(Error::InvalidParameter("starting point lies outside the domain".into()));
    }
    let on_boundary = level.abs() <= 1e-12 * r;
    let w = [-epsilon * v[0], -epsilon * v[1], -epsilon * v[2]];
    let a = dot(w, w);
    let half_b = dot(d, w);
    if on_boundary {
        // One root is zero; the other is −2 d·w / |w|², positive iff v·n > 0.
        let cos = dot(d, v) / (dot(d, d).sqrt() * speed);
        if cos.abs() < GRAZING_TOL {
            return Err(Error::Grazing(format!("|v̂·n| = {:e} at the start point", cos.abs())));
        }
        if cos < 0.0 {
            return Err(Error::InvalidParameter("backward ray leaves the domain immediately (v·n < 0)".into()));
        }
        return Ok(-2.0 * half_b / a);
    }
    let c = dot(d, d) - r * r;
    // c < 0 strictly inside, so the discriminant is positive and the roots
    // have opposite signs.
    let disc = (half_b * half_b - a * c).max(0.0);
    let q = -(half_b + half_b.signum() * disc.sqrt());
    let (t1, t2) = if q == 0.0 { ((-c / a).sqrt(), -(-c / a).sqrt()) } else { (q / a, c / q) };
    let t = t1.max(t2);
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("no positive hitting time (roots {t1}, {t2})")));
    }
    Ok(t)
}

/// Backward exit point `x − ε t_b v`.
pub fn hitting_point(domain: &ConvexDomain, x: [f64; 3], v: [f64; 3], epsilon: f64) -> Result<(f64, [f64; 3])> {
    let t = hitting_time(domain, x, v, epsilon)?;
    Ok((t, [x[0] - epsilon * t * v[0], x[1] - epsilon * t * v[1], x[2] - epsilon * t * v[2]]))
}

/// Samples `v` from the diffuse boundary law `∝ μ(v)|v·n|` on `{v·n > 0}`.
///
/// Tangential components are standard normal and the normal component is
/// Rayleigh distributed with unit scale, which is exact for the Maxwellian
/// `μ = (2π)^{-3/2} e^{-|v|²/2}`. The collision parameters only select the
/// measure normalization, which does not change the normalized law.
pub fn sample_diffuse_velocity<R: Rng + ?Sized>(n: [f64; 3], _params: &CollisionParams, rng: &mut R) -> [f64; 3] {
    let (t1, t2) = tangent_frame(n);
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(Exp1);
    let s = (2.0 * e).sqrt();
    [
        s * n[0] + a * t1[0] + b * t2[0],
        s * n[1] + a * t1[1] + b * t2[1],
        s * n[2] + a * t1[2] + b * t2[2],
    ]
}

/// Orthonormal tangent vectors completing a unit normal.
fn tangent_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Branch-free construction (Duff et al. 2017).
    let sign = 1f64.copysign(n[2]);
    let a = -1.0 / (sign + n[2]);
    let b = n[0] * n[1] * a;
    let t1 = [1.0 + sign * n[0] * n[0] * a, sign * b, -sign * n[0]];
    let t2 = [b, sign + n[1] * n[1] * a, -n[1]];
    (t1, t2)
}

/// Generates `k` stochastic triples starting from `(x, v)`.
///
/// Triple `j` records the accumulated time and hit point of the `j`-th
/// backward flight together with the freshly sampled diffuse velocity there.
/// A grazing draw is replaced by a fresh sample, up to
/// [`MAX_GRAZING_RETRIES`] times.
pub fn generate_cycle<R: Rng + ?Sized>(
    domain: &ConvexDomain,
    x: [f64; 3],
    v: [f64; 3],
    k: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<StochasticTriple>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let params = CollisionParams::default();
    let mut out = Vec::with_capacity(k);
    let (mut t, mut pos, mut vel) = (0.0, x, v);
    for _ in 0..k {
        let (tb, hit) = hitting_point(domain, pos, vel, epsilon)?;
        let hit = domain.snap_to_boundary(hit);
        t += tb;
        let n = domain.normal(hit);
        let mut retries = 0;
        let next = loop {
            let cand = sample_diffuse_velocity(n, &params, rng);
            let cos = dot(cand, n) / dot(cand, cand).sqrt();
            if cos >= GRAZING_TOL {
                break cand;
            }
            retries += 1;
            if retries > MAX_GRAZING_RETRIES {
                return Err(Error::Grazing(format!("{MAX_GRAZING_RETRIES} consecutive grazing draws")));
            }
        };
        out.push(StochasticTriple { t, x: hit, v: next });
        pos = hit;
        vel = next;
    }
    Ok(out)
}

/// Wilson score interval for `hits` successes in `n` trials at the given
/// two-sided confidence level.
pub fn wilson_interval(hits: usize, n: usize, confidence: f64) -> Result<ProbabilityEstimate> {
    if n == 0 || hits > n {
        return Err(Error::InvalidParameter(format!("invalid counts {hits}/{n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * confidence);
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(ProbabilityEstimate {
        estimate: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
        hits,
        samples: n,
    })
}

/// Seed of the `shard`-th independent stream derived from `seed`.
fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Monte Carlo estimate of `P(t_k < T₀/ε)` under the product diffuse measure.
///
/// The first flight starts from `(x, v)`; the remaining `k − 1` velocities
/// are diffuse draws. Samples are split into shards of 1024, each with its
/// own stream derived from one seed drawn from `rng`, so results are
/// reproducible and independent of the thread count. Calling this with
/// identically seeded generators for several `k` reuses the same cycles, so
/// the estimates are pathwise nonincreasing in `k`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_exit_measure<R: Rng + ?Sized>(
    domain: &ConvexDomain,
    x: [f64; 3],
    v: [f64; 3],
    t0: f64,
    k: usize,
    epsilon: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!("n_samples must be at least 1000, got {n_samples}")));
    }
    if !(t0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("T0 must be nonnegative, got {t0}")));
    }
    domain.validate()?;
    let seed: u64 = rng.gen();
    let threshold = t0 / epsilon;
    const SHARD: usize = 1024;
    let shards = n_samples.div_ceil(SHARD);
    let hits = (0..shards)
        .into_par_iter()
        .map(|s| -> Result<usize> {
            let mut r = shard_rng(seed, s as u64);
            let count = SHARD.min(n_samples - s * SHARD);
            let mut hits = 0;
            for _ in 0..count {
                let cycle = generate_cycle(domain, x, v, k, epsilon, &mut r)?;
                if cycle[k - 1].t < threshold {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    wilson_interval(hits, n_samples, 0.95)
}

/// Chi-square test of samples against the Rayleigh law `s e^{-s²/2}`.
///
/// Uses `bins` equiprobable bins with edges `√(−2 ln(1 − i/bins))`.
pub fn rayleigh_chi_square(samples: &[f64], bins: usize) -> Result<ChiSquareTest> {
    if bins < 2 || samples.len() < 5 * bins {
        return Err(Error::InvalidParameter("need at least 2 bins and 5 expected counts per bin".into()));
    }
    let mut counts = vec![0usize; bins];
    for &s in samples {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative sample {s}")));
        }
        let u = 1.0 - (-0.5 * s * s).exp();
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Bisection oracle for the hitting time, used to cross-check the closed form.
pub fn hitting_time_bisection(domain: &ConvexDomain, x: [f64; 3], v: [f64; 3], epsilon: f64) -> Result<f64> {
    let speed = dot(v, v).sqrt();
    if speed == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let f = |t: f64| domain.level([x[0] - epsilon * t * v[0], x[1] - epsilon * t * v[1], x[2] - epsilon * t * v[2]]);
    // The chord of a ball is at most its diameter.
    let mut lo = 0.0;
    let mut hi = 2.0 * domain.radius / (epsilon * speed) * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    // On the boundary the level is zero at t = 0; step inside first.
    if f(lo).abs() <= 1e-12 * domain.radius {
        let mut probe = hi * 1e-9;
        while f(probe) >= 0.0 && probe < hi {
            probe *= 2.0;
        }
        lo = probe;
    }
    if f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
