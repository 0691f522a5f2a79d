//! Locating the sign change of a noisy decaying phase series.
//!
//! A single cycle's phase uncertainty is far larger than the change between
//! cycles, so the crossing is read off a weighted least-squares fit of
//! `a·e^(−κ(t − t0)) + b`. For fixed `κ` the model is linear in `(a, b)`;
//! `κ` is found by a log-spaced scan followed by golden-section refinement.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub t0: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub offset: f64,
    /// Weighted residual sum of squares.
    pub rss: f64,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * (t - self.t0)).exp() + self.offset
    }

    /// Time at which the fitted curve passes through zero, if it does.
    pub fn zero_crossing(&self) -> Option<f64> {
        let r = -self.offset / self.amplitude;
        if r > 0.0 && r.is_finite() && self.rate > 0.0 {
            Some(self.t0 - r.ln() / self.rate)
        } else {
            None
        }
    }
}

fn linear_part(t: &[f64], y: &[f64], w: &[f64], t0: f64, rate: f64) -> Option<(f64, f64, f64)> {
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&ti, &yi), &wi) in t.iter().zip(y).zip(w) {
        let x = (-rate * (ti - t0)).exp();
        sw += wi;
        sx += wi * x;
        sxx += wi * x * x;
        sy += wi * yi;
        sxy += wi * x * yi;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 1e-12 * sw * sxx) {
        return None;
    }
    let a = (sw * sxy - sx * sy) / det;
    let b = (sxx * sy - sx * sxy) / det;
    let rss = t
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&ti, &yi), &wi)| wi * (yi - a * (-rate * (ti - t0)).exp() - b).powi(2))
        .sum();
    Some((a, b, rss))
}

/// Weighted fit of an exponential decay to an offset. `weights` are
/// typically inverse variances.
pub fn fit_decay(t: &[f64], y: &[f64], weights: &[f64]) -> Option<DecayFit> {
    if t.len() < 4 || t.len() != y.len() || t.len() != weights.len() {
        return None;
    }
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    if !(span > 0.0) {
        return None;
    }
    let rss_at = |log_rate: f64| {
        linear_part(t, y, weights, t0, log_rate.exp()).map_or(f64::INFINITY, |(_, _, r)| r)
    };

    let (lo, hi) = ((0.01 / span).ln(), (100.0 / span).ln());
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let best = (0..=n)
        .min_by(|&i, &j| rss_at(grid[i]).total_cmp(&rss_at(grid[j])))
        .unwrap();

    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rss_at(d);
        }
    }
    let rate = (0.5 * (a + b)).exp();
    let (amplitude, offset, rss) = linear_part(t, y, weights, t0, rate)?;
    Some(DecayFit { t0, amplitude, rate, offset, rss })
}

/// Linearly interpolated first sign change of a sampled series.
pub fn first_sign_change(t: &[f64], y: &[f64]) -> Option<f64> {
    t.windows(2).zip(y.windows(2)).find_map(|(tw, yw)| {
        if yw[0] == 0.0 {
            Some(tw[0])
        } else if yw[1] == 0.0 || yw[0].signum() != yw[1].signum() {
            Some(tw[0] + (tw[1] - tw[0]) * yw[0] / (yw[0] - yw[1]))
        } else {
            None
        }
    })
}
