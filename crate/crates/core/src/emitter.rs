//! Two-level single-photon emitter under continuous-wave pumping.
//!
//! Each cycle waits an exponential excitation time (rate `r_p`) followed by
//! an exponential decay time (rate `1/τ_f`); the photon leaves at the decay.
//! Because the emitter must be re-excited before it can emit again, the
//! stream is antibunched with `g²(τ) = 1 − exp(−|τ|(r_p + 1/τ_f))`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmitterError {
    #[error("invalid emitter parameter: {0}")]
    InvalidParams(String),
    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterParams {
    pub lifetime_ns: f64,
    pub pump_rate_per_ns: f64,
    /// Rate of OFF→ON switching; blinking is active only when both
    /// telegraph rates are non-zero.
    pub blink_on_rate_per_ns: f64,
    /// Rate of ON→OFF switching.
    pub blink_off_rate_per_ns: f64,
    pub collection_efficiency: f64,
}

impl Default for EmitterParams {
    /// Calibrated so the antibunching dip has a 4 ns FWHM with a 4 ns
    /// excited-state lifetime.
    fn default() -> Self {
        let lifetime_ns = 4.0;
        Self {
            lifetime_ns,
            pump_rate_per_ns: pump_rate_for_fwhm(lifetime_ns, 4.0)
                .expect("4 ns lifetime supports a 4 ns dip"),
            blink_on_rate_per_ns: 0.0,
            blink_off_rate_per_ns: 0.0,
            collection_efficiency: 1.0,
        }
    }
}

impl EmitterParams {
    /// Non-blinking, lossless emitter.
    pub fn two_level(lifetime_ns: f64, pump_rate_per_ns: f64) -> Self {
        Self {
            lifetime_ns,
            pump_rate_per_ns,
            blink_on_rate_per_ns: 0.0,
            blink_off_rate_per_ns: 0.0,
            collection_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), EmitterError> {
        let bad = |msg: String| Err(EmitterError::InvalidParams(msg));
        if !(self.lifetime_ns > 0.0 && self.lifetime_ns.is_finite()) {
            return bad(format!("lifetime_ns must be > 0, got {}", self.lifetime_ns));
        }
        for (name, v) in [
            ("pump_rate_per_ns", self.pump_rate_per_ns),
            ("blink_on_rate_per_ns", self.blink_on_rate_per_ns),
            ("blink_off_rate_per_ns", self.blink_off_rate_per_ns),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            return bad(format!(
                "collection_efficiency must be in [0, 1], got {}",
                self.collection_efficiency
            ));
        }
        Ok(())
    }

    pub fn decay_rate_per_ns(&self) -> f64 {
        1.0 / self.lifetime_ns
    }

    pub fn blinking(&self) -> bool {
        self.blink_on_rate_per_ns > 0.0 && self.blink_off_rate_per_ns > 0.0
    }

    /// Long-run fraction of time spent in the bright state.
    pub fn duty_cycle(&self) -> f64 {
        if self.blinking() {
            self.blink_on_rate_per_ns / (self.blink_on_rate_per_ns + self.blink_off_rate_per_ns)
        } else {
            1.0
        }
    }

    /// Steady-state rate of photons leaving the emitter and collected.
    pub fn mean_emission_rate_per_ns(&self) -> f64 {
        let decay = self.decay_rate_per_ns();
        let r = self.pump_rate_per_ns;
        if r == 0.0 {
            return 0.0;
        }
        r * decay / (r + decay) * self.collection_efficiency * self.duty_cycle()
    }

    /// Full width at half maximum of the antibunching dip.
    pub fn dip_fwhm_ns(&self) -> f64 {
        2.0 * std::f64::consts::LN_2 / (self.pump_rate_per_ns + self.decay_rate_per_ns())
    }
}

/// Pump rate giving a dip of width `fwhm_ns` for the given lifetime, if
/// one exists (the dip can be no wider than `2 ln2 · τ_f`).
pub fn pump_rate_for_fwhm(lifetime_ns: f64, fwhm_ns: f64) -> Option<f64> {
    let r = 2.0 * std::f64::consts::LN_2 / fwhm_ns - 1.0 / lifetime_ns;
    (r > 0.0 && r.is_finite()).then_some(r)
}

/// Pump rate giving a collected rate of `rate_per_ns`, if reachable.
pub fn pump_rate_for_rate(lifetime_ns: f64, efficiency: f64, rate_per_ns: f64) -> Option<f64> {
    let decay = 1.0 / lifetime_ns;
    let emitted = rate_per_ns / efficiency;
    (emitted > 0.0 && emitted < decay).then(|| emitted * decay / (decay - emitted))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionStream {
    pub times_ns: Vec<f64>,
    pub duration_ns: f64,
    pub seed: u64,
}

impl EmissionStream {
    pub fn len(&self) -> usize {
        self.times_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ns.is_empty()
    }
}

const CYCLE_STREAM: u64 = 0;
const TELEGRAPH_STREAM: u64 = 1;

/// Two-state switching process, starting in the bright state.
struct Telegraph<R> {
    rng: R,
    on: bool,
    next_switch: f64,
    to_on: Exp<f64>,
    to_off: Exp<f64>,
}

impl<R: Rng> Telegraph<R> {
    fn new(mut rng: R, on_rate: f64, off_rate: f64) -> Self {
        let to_on = Exp::new(on_rate).expect("validated rate");
        let to_off = Exp::new(off_rate).expect("validated rate");
        let next_switch = to_off.sample(&mut rng);
        Self {
            rng,
            on: true,
            next_switch,
            to_on,
            to_off,
        }
    }

    fn is_on_at(&mut self, t: f64) -> bool {
        while self.next_switch <= t {
            self.on = !self.on;
            let dwell = if self.on { &self.to_off } else { &self.to_on };
            self.next_switch += dwell.sample(&mut self.rng);
        }
        self.on
    }
}

pub fn emit_stream(
    p: &EmitterParams,
    duration_ns: f64,
    seed: u64,
) -> Result<EmissionStream, EmitterError> {
    p.validate()?;
    if !(duration_ns > 0.0 && duration_ns.is_finite()) {
        return Err(EmitterError::InvalidDuration(duration_ns));
    }
    let mut times_ns = Vec::new();
    if p.pump_rate_per_ns > 0.0 {
        let expected = p.mean_emission_rate_per_ns() * duration_ns;
        times_ns.reserve((expected * 1.01) as usize + 16);

        let mut rng = substream(seed, CYCLE_STREAM);
        let excite = Exp::new(p.pump_rate_per_ns).expect("validated rate");
        let decay = Exp::new(p.decay_rate_per_ns()).expect("validated rate");
        let mut telegraph = p.blinking().then(|| {
            Telegraph::new(
                substream(seed, TELEGRAPH_STREAM),
                p.blink_on_rate_per_ns,
                p.blink_off_rate_per_ns,
            )
        });
        let lossy = p.collection_efficiency < 1.0;

        let mut t = 0.0_f64;
        loop {
            t += excite.sample(&mut rng) + decay.sample(&mut rng);
            if t > duration_ns {
                break;
            }
            if lossy && rng.gen::<f64>() >= p.collection_efficiency {
                continue;
            }
            if let Some(tg) = telegraph.as_mut() {
                if !tg.is_on_at(t) {
                    continue;
                }
            }
            // Keep the stream strictly increasing even when a draw is
            // below the float spacing at `t`.
            let stamp = match times_ns.last() {
                Some(&last) if t <= last => last.next_up(),
                _ => t,
            };
            if stamp > duration_ns {
                break;
            }
            times_ns.push(stamp);
        }
    }
    Ok(EmissionStream {
        times_ns,
        duration_ns,
        seed,
    })
}

/// Closed-form `g²(τ)` of the non-blinking two-level emitter.
pub fn g2_analytic(tau_ns: f64, p: &EmitterParams) -> f64 {
    1.0 - (-tau_ns.abs() * (p.pump_rate_per_ns + p.decay_rate_per_ns())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn zero_pump_gives_empty_stream() {
        let p = EmitterParams::two_level(1.0, 0.0);
        let s = emit_stream(&p, 1e6, 3).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.duration_ns, 1e6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = EmitterParams::two_level(1.0, 1.0);
        assert!(matches!(
            emit_stream(&p, 0.0, 1),
            Err(EmitterError::InvalidDuration(_))
        ));
        assert!(emit_stream(&p, f64::NAN, 1).is_err());
        for bad in [
            EmitterParams::two_level(0.0, 1.0),
            EmitterParams::two_level(1.0, -1.0),
            EmitterParams {
                collection_efficiency: 1.5,
                ..p
            },
            EmitterParams {
                blink_on_rate_per_ns: -0.1,
                ..p
            },
        ] {
            assert!(matches!(
                emit_stream(&bad, 10.0, 1),
                Err(EmitterError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn saturation_half_rate() {
        // r_p = Γ: steady state r_p·Γ/(r_p+Γ) = 1/(2τ_f). The count of a
        // renewal process with Exp(r)+Exp(Γ) gaps has variance T·σ²/μ³.
        let tau = 1.0;
        let p = EmitterParams::two_level(tau, 1.0 / tau);
        let duration = 1e7;
        let s = emit_stream(&p, duration, 11).unwrap();
        let mean_gap = 2.0 * tau;
        let var_gap = 2.0 * tau * tau;
        let se_rate = (duration * var_gap / mean_gap.powi(3)).sqrt() / duration;
        let rate = s.len() as f64 / duration;
        assert!(
            (rate - 0.5 / tau).abs() < 3.0 * se_rate,
            "rate {rate} vs {} ± {se_rate}",
            0.5 / tau
        );
    }

    #[test]
    fn count_rate_calibration() {
        // 1 ns lifetime, 1e-3 collection: ~1e5 counts per second.
        let target = 1e5 * 1e-9;
        let r = pump_rate_for_rate(1.0, 1e-3, target).unwrap();
        let p = EmitterParams {
            collection_efficiency: 1e-3,
            ..EmitterParams::two_level(1.0, r)
        };
        assert!((p.mean_emission_rate_per_ns() - target).abs() < 1e-15);
        let duration = 1e9; // one second
        let s = emit_stream(&p, duration, 5).unwrap();
        let n = s.len() as f64;
        assert!((n - 1e5).abs() < 3.0 * 1e5_f64.sqrt(), "{n} counts");
    }

    #[test]
    fn streams_are_strictly_increasing_and_in_range() {
        let p = EmitterParams::two_level(1.0, 5.0);
        for seed in 0..5 {
            let s = emit_stream(&p, 1e5, seed).unwrap();
            assert!(s.times_ns.windows(2).all(|w| w[1] > w[0]));
            assert!(s.times_ns.iter().all(|&t| (0.0..=1e5).contains(&t)));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let p = EmitterParams::default();
        let a = emit_stream(&p, 1e5, 42).unwrap();
        let b = emit_stream(&p, 1e5, 42).unwrap();
        let c = emit_stream(&p, 1e5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times_ns, c.times_ns);
    }

    #[test]
    fn blinking_duty_cycle() {
        let base = EmitterParams::two_level(1.0, 1.0);
        let (on, off) = (0.01, 0.03);
        let p = EmitterParams {
            blink_on_rate_per_ns: on,
            blink_off_rate_per_ns: off,
            ..base
        };
        let duration = 2e7;
        let n = emit_stream(&p, duration, 9).unwrap().len() as f64;
        let bright_rate = base.mean_emission_rate_per_ns();
        let duty = n / (bright_rate * duration);
        let expected = on / (on + off);
        // Telegraph occupancy variance 2·k_on·k_off/(k_on+k_off)³/T plus
        // photon counting noise.
        let var_occ = 2.0 * on * off / (on + off).powi(3) / duration;
        let var_photon = expected / (bright_rate * duration);
        let tol = 3.0 * (var_occ + var_photon).sqrt();
        assert!(
            (duty - expected).abs() < tol,
            "duty {duty} vs {expected} ± {tol}"
        );
        assert!((p.duty_cycle() - expected).abs() < 1e-15);
    }

    #[test]
    fn single_rate_zero_disables_blinking() {
        let p = EmitterParams {
            blink_on_rate_per_ns: 0.0,
            blink_off_rate_per_ns: 0.5,
            ..EmitterParams::two_level(1.0, 1.0)
        };
        assert!(!p.blinking());
        let q = EmitterParams::two_level(1.0, 1.0);
        assert_eq!(
            emit_stream(&p, 1e4, 1).unwrap(),
            emit_stream(&q, 1e4, 1).unwrap()
        );
    }

    #[test]
    fn g2_analytic_limits() {
        let p = EmitterParams::two_level(1.0, 0.5);
        assert_eq!(g2_analytic(0.0, &p), 0.0);
        assert!((g2_analytic(20.0, &p) - 1.0).abs() < 1e-6);
        assert!((g2_analytic(-20.0, &p) - 1.0).abs() < 1e-6);
        assert_eq!(g2_analytic(1.3, &p), g2_analytic(-1.3, &p));
    }

    #[test]
    fn default_dip_is_four_ns_wide() {
        let p = EmitterParams::default();
        assert!((p.pump_rate_per_ns + p.decay_rate_per_ns() - LN_2 / 2.0).abs() < 1e-15);
        // Bisection on the closed form for g² = 1/2.
        let (mut lo, mut hi) = (0.0, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g2_analytic(mid, &p) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fwhm = 2.0 * 0.5 * (lo + hi);
        assert!((fwhm - 4.0).abs() < 0.04, "fwhm {fwhm}");
        assert!((p.dip_fwhm_ns() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_calibration_limits() {
        assert!(pump_rate_for_fwhm(1.0, 4.0).is_none());
        assert!(pump_rate_for_fwhm(4.0, 4.0).is_some());
        assert!(pump_rate_for_rate(1.0, 1.0, 2.0).is_none());
    }
}
