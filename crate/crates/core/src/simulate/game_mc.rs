use super::rng::PathRng;
use super::{per_path, step_count, Estimate, McParams, SimError, Vol};
use crate::game::{FreeBoundaries, ValueSurface};
use crate::model::{terminal_transform, ProblemSpec, TerminalMode};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    /// The minimizer stopped on the upper boundary.
    TauHat,
    /// The maximizer stopped on the lower boundary.
    SigmaHat,
    Maturity,
    /// Left the band; paid the obstacle on that side.
    BandExit,
}

/// One trajectory of the game diffusion `dY = (sigma sigma' + mu) dt + sigma dB`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub stop_time: f64,
    pub stop_kind: StopKind,
    /// `int_s^stop e^{ct} h dt` by the trapezoid rule along the path.
    pub dividend: f64,
    pub payoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// Stop on the first step at or beyond the player's free boundary.
    #[default]
    FreeBoundary,
    Immediately,
    Never,
}

/// Stopping rules of the minimizer (`p1`, upper side) and the maximizer
/// (`p2`, lower side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GameRules {
    pub p1: StopRule,
    pub p2: StopRule,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum TerminalPayoff {
    Given,
    Envelope { a: f64, b: f64 },
}

impl TerminalPayoff {
    pub fn for_mode<T: Real>(spec: &ProblemSpec, surface: &ValueSurface<T>) -> Result<TerminalPayoff, SimError> {
        Ok(match surface.mode {
            TerminalMode::Given => TerminalPayoff::Given,
            TerminalMode::Envelope => {
                let tt = terminal_transform(spec, &surface.grid)?;
                TerminalPayoff::Envelope { a: tt.a, b: tt.b }
            }
        })
    }

    pub fn value(&self, spec: &ProblemSpec, y: f64) -> Result<f64, SimError> {
        let t = spec.horizon;
        Ok(match *self {
            TerminalPayoff::Envelope { a, .. } if y < a => -spec.f1(t, y)?,
            TerminalPayoff::Envelope { b, .. } if y > b => spec.f2(t, y)?,
            _ => spec.g(y)?,
        })
    }
}

struct Game<'a> {
    spec: &'a ProblemSpec,
    vol: Vol<'a>,
    s: f64,
    x: f64,
    dt: f64,
    seed: u64,
    n_steps: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rules: GameRules,
    terminal: TerminalPayoff,
}

impl Game<'_> {
    fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.spec.horizon
        } else {
            self.s + k as f64 * self.dt
        }
    }

    /// Payoff if the path stops at step `k` in state `y`.
    fn stop(&self, k: usize, y: f64) -> Result<Option<(StopKind, f64)>, SimError> {
        let t = self.time(k);
        let spec = self.spec;
        if y <= spec.band_lo {
            return Ok(Some((StopKind::BandExit, -spec.f1(t, y)?)));
        }
        if y >= spec.band_hi {
            return Ok(Some((StopKind::BandExit, spec.f2(t, y)?)));
        }
        let now = k == 0;
        let p2 = match self.rules.p2 {
            StopRule::Immediately => now,
            StopRule::Never => false,
            StopRule::FreeBoundary => y <= self.lo[k],
        };
        if p2 {
            return Ok(Some((StopKind::SigmaHat, -spec.f1(t, y)?)));
        }
        let p1 = match self.rules.p1 {
            StopRule::Immediately => now,
            StopRule::Never => false,
            StopRule::FreeBoundary => y >= self.hi[k],
        };
        if p1 {
            return Ok(Some((StopKind::TauHat, spec.f2(t, y)?)));
        }
        if k == self.n_steps {
            return Ok(Some((StopKind::Maturity, self.terminal.value(spec, y)?)));
        }
        Ok(None)
    }

    fn play(&self, path: u64, record: bool) -> Result<Path, SimError> {
        let spec = self.spec;
        let mut rng = PathRng::new(self.seed, path);
        let sqrt_dt = self.dt.sqrt();
        let mut y = self.x;
        let mut out = Path {
            times: Vec::new(),
            states: Vec::new(),
            stop_time: self.s,
            stop_kind: StopKind::Maturity,
            dividend: 0.0,
            payoff: 0.0,
        };
        if record {
            out.times.push(self.s);
            out.states.push(y);
        }
        let mut prev = spec.growth(self.s) * spec.h(self.s, y)?;
        let mut k = 0;
        loop {
            if let Some((kind, pay)) = self.stop(k, y)? {
                out.stop_time = self.time(k);
                out.stop_kind = kind;
                out.payoff = out.dividend + pay;
                return Ok(out);
            }
            let (sig, dsig) = self.vol.at(y)?;
            y += (sig * dsig + spec.mu(y)) * self.dt + sig * sqrt_dt * rng.normal();
            k += 1;
            let t = self.time(k);
            let cur = spec.growth(t) * spec.h(t, y)?;
            out.dividend += 0.5 * self.dt * (prev + cur);
            prev = cur;
            if record {
                out.times.push(t);
                out.states.push(y);
            }
        }
    }
}

/// Free path of the game diffusion from `(s, x)` to the horizon; it stops
/// early only on leaving the band.
pub fn simulate_uncontrolled(spec: &ProblemSpec, s: f64, x: f64, dt: f64, seed: u64, path: u64) -> Result<Path, SimError> {
    let n_steps = step_count(s, spec.horizon, dt)?;
    let game = Game {
        spec,
        vol: Vol::new(spec),
        s,
        x,
        dt,
        seed,
        n_steps,
        lo: Vec::new(),
        hi: Vec::new(),
        rules: GameRules {
            p1: StopRule::Never,
            p2: StopRule::Never,
        },
        terminal: TerminalPayoff::Given,
    };
    game.play(path, true)
}

/// Per-path payoffs of the game from `(s, x)` under `rules`, in path order.
pub fn game_payoffs<T: Real>(
    spec: &ProblemSpec,
    surface: &ValueSurface<T>,
    boundaries: &FreeBoundaries,
    s: f64,
    x: f64,
    mc: &McParams,
    rules: GameRules,
) -> Result<Vec<f64>, SimError> {
    mc.validate()?;
    if !(s >= 0.0 && s <= spec.horizon && x.is_finite()) {
        return Err(SimError::Start { s, x });
    }
    let n_steps = step_count(s, spec.horizon, mc.dt)?;
    let mut lo = Vec::with_capacity(n_steps + 1);
    let mut hi = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t = if k == n_steps { spec.horizon } else { s + k as f64 * mc.dt };
        let (a, b) = boundaries.at(t);
        lo.push(a);
        hi.push(b);
    }
    let game = Game {
        spec,
        vol: Vol::new(spec),
        s,
        x,
        dt: mc.dt,
        seed: mc.seed,
        n_steps,
        lo,
        hi,
        rules,
        terminal: TerminalPayoff::for_mode(spec, surface)?,
    };
    per_path(mc.n_paths, |p| Ok(game.play(p, false)?.payoff))
}

/// Monte Carlo estimate of `V(s, x)` with both players on their free
/// boundaries (or the rules given).
pub fn saddle_game_estimate<T: Real>(
    spec: &ProblemSpec,
    surface: &ValueSurface<T>,
    boundaries: &FreeBoundaries,
    s: f64,
    x: f64,
    mc: &McParams,
    rules: GameRules,
) -> Result<Estimate, SimError> {
    let pay = game_payoffs(spec, surface, boundaries, s, x, mc, rules)?;
    Ok(Estimate::from_samples(&pay))
}
