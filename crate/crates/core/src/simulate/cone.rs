use super::game_mc::TerminalPayoff;
use super::rng::PathRng;
use super::{per_path, step_count, Estimate, McParams, SimError, Vol};
use crate::game::{FreeBoundaries, ValueSurface};
use crate::model::{CurvePair, ProblemSpec, Side};
use crate::scalar::Real;

/// One sampled point and the two exit-time functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample {
    pub side: Side,
    pub s: f64,
    pub x: f64,
    /// `F_U`: region between the free boundaries after `s`.
    pub f_u: Estimate,
    /// `F_{U ∪ C}`: the same region with the cone at `(s, x)` attached.
    pub f_cone: Estimate,
    /// Per-path `F_{U ∪ C} - F_U` on common random numbers.
    pub diff_mean: f64,
    pub diff_se: f64,
    /// `diff >= -3 SE` below `a~`, `diff <= 3 SE` above `b~`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub eta: f64,
    pub samples: Vec<ConeSample>,
}

impl ConeReport {
    pub fn violations(&self) -> usize {
        self.samples.iter().filter(|c| !c.holds).count()
    }
}

struct Probe<'a> {
    spec: &'a ProblemSpec,
    vol: Vol<'a>,
    side: Side,
    s: f64,
    x: f64,
    dt: f64,
    eta: f64,
    seed: u64,
    times: Vec<f64>,
    /// Free boundaries and reference curves per step.
    fb: Vec<(f64, f64)>,
    ab: Vec<(f64, f64)>,
    terminal: TerminalPayoff,
}

impl Probe<'_> {
    fn in_cone(&self, k: usize, y: f64) -> bool {
        let t = self.times[k] - self.s;
        let (a, b) = self.ab[k];
        match self.side {
            Side::Lower => y > self.x && y <= a && t <= self.eta * (y - self.x),
            Side::Upper => y < self.x && y >= b && t <= self.eta * (self.x - y),
        }
    }

    fn exit_payoff(&self, k: usize, y: f64) -> Result<f64, SimError> {
        let t = self.times[k];
        if k + 1 == self.times.len() {
            return self.terminal.value(self.spec, y);
        }
        let (a, b) = self.ab[k];
        Ok(if y <= a {
            -self.spec.f1(t, y)?
        } else if y >= b {
            self.spec.f2(t, y)?
        } else {
            // Leaving between the reference curves only happens through
            // the cone mouth; pay the nearer obstacle.
            if y - a < b - y {
                -self.spec.f1(t, y)?
            } else {
                self.spec.f2(t, y)?
            }
        })
    }

    /// Both functionals on one path: the shared trajectory is followed
    /// until it leaves the larger region; the smaller region's exit is
    /// recorded on the way.
    fn run(&self, path: u64) -> Result<(f64, f64), SimError> {
        let spec = self.spec;
        let mut rng = PathRng::new(self.seed, path);
        let n = self.times.len() - 1;
        let sqrt_dt = self.dt.sqrt();
        let mut y = self.x;
        let mut dividend = 0.0;
        let mut prev = spec.growth(self.s) * spec.h(self.s, y)?;
        let mut f_u = None;
        for k in 1..=n {
            let (sig, dsig) = self.vol.at(y)?;
            y += (sig * dsig + spec.mu(y)) * self.dt + sig * sqrt_dt * rng.normal();
            let t = self.times[k];
            let cur = spec.growth(t) * spec.h(t, y)?;
            dividend += 0.5 * (t - self.times[k - 1]) * (prev + cur);
            prev = cur;
            let band = y > spec.band_lo && y < spec.band_hi;
            let (lo, hi) = self.fb[k];
            let in_u = band && y > lo && y < hi && k < n;
            let in_cone = band && k < n && self.in_cone(k, y);
            if f_u.is_none() && !in_u {
                f_u = Some(dividend + self.exit_payoff(k, y)?);
            }
            if !in_u && !in_cone {
                let pay = dividend + self.exit_payoff(k, y)?;
                return Ok((f_u.unwrap_or(pay), pay));
            }
        }
        unreachable!("every path exits at the horizon")
    }
}

/// Points `offset` outside the free boundary on `n_samples` evenly spaced
/// levels strictly before the horizon, lower side then upper side.
pub fn contact_samples(fb: &FreeBoundaries, n_samples: usize, offset: f64) -> Vec<(Side, f64, f64)> {
    let n = fb.len();
    let mut out = Vec::with_capacity(2 * n_samples);
    for side in [Side::Lower, Side::Upper] {
        for j in 0..n_samples {
            let k = (j * (n - 1)) / n_samples.max(1);
            let x = match side {
                Side::Lower => fb.a_tilde[k] - offset,
                Side::Upper => fb.b_tilde[k] + offset,
            };
            out.push((side, fb.t[k], x));
        }
    }
    out
}

/// Monte Carlo comparison of the exit functionals of `U` and `U ∪ C` at
/// each point. `U` lies between the free boundaries for `t > s`; the start
/// sits outside it, as if the boundary jumped to `x` at `s`. Exits are
/// checked from the first step on, for both regions alike, so a cone of
/// zero aperture gives identical samples.
#[allow(clippy::too_many_arguments)]
pub fn cone_monotonicity_probe<T: Real>(
    spec: &ProblemSpec,
    surface: &ValueSurface<T>,
    boundaries: &FreeBoundaries,
    curves: &CurvePair,
    points: &[(Side, f64, f64)],
    eta: f64,
    mc: &McParams,
) -> Result<ConeReport, SimError> {
    mc.validate()?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(SimError::Params(format!("aperture {eta} must be non-negative")));
    }
    let terminal = TerminalPayoff::for_mode(spec, surface)?;
    let mut samples = Vec::with_capacity(points.len());
    for &(side, s, x) in points {
        if !(s >= 0.0 && s < spec.horizon && x > spec.band_lo && x < spec.band_hi) {
            return Err(SimError::Start { s, x });
        }
        let n = step_count(s, spec.horizon, mc.dt)?;
        let times: Vec<f64> = (0..=n)
            .map(|k| if k == n { spec.horizon } else { s + k as f64 * mc.dt })
            .collect();
        let probe = Probe {
            spec,
            vol: Vol::new(spec),
            side,
            s,
            x,
            dt: mc.dt,
            eta,
            seed: mc.seed,
            fb: times.iter().map(|&t| boundaries.at(t)).collect(),
            ab: times.iter().map(|&t| curves.at(t)).collect(),
            times,
            terminal,
        };
        let pairs = per_path(mc.n_paths, |p| probe.run(p))?;
        let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let c: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
        let de = Estimate::from_samples(&d);
        let holds = match side {
            Side::Lower => de.mean >= -3.0 * de.se,
            Side::Upper => de.mean <= 3.0 * de.se,
        };
        samples.push(ConeSample {
            side,
            s,
            x,
            f_u: Estimate::from_samples(&u),
            f_cone: Estimate::from_samples(&c),
            diff_mean: de.mean,
            diff_se: de.se,
            holds,
        });
    }
    Ok(ConeReport { eta, samples })
}
