//! Brute-force dispatch oracles for single-bus microgrids with no network
//! losses, where the PCC exchange is simply generation + discharge + PV −
//! charge − load.

/// Quadratic fuel curve `a P² + b P + c` with price `price` $/L.
#[derive(Debug, Clone, Copy)]
pub struct Fuel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub price: f64,
}

impl Fuel {
    pub fn reference(price: f64) -> Self {
        Fuel { a: 0.0001773, b: 0.1709, c: 14.67, price }
    }

    /// Cost of running at `p` kW; zero output means the unit is off.
    pub fn cost(&self, p: f64) -> f64 {
        if p > 0.0 {
            self.price * (self.a * p * p + self.b * p + self.c)
        } else {
            0.0
        }
    }

    /// Unconstrained optimum of `λ P − cost(P)` for a committed unit.
    pub fn interior_optimum(&self, lambda: f64) -> f64 {
        (lambda / self.price - self.b) / (2.0 * self.a)
    }
}

/// Best two-step generator schedule on an integer-kW grid with output
/// in `[0, p_max]` and step change at most `ramp`. Returns `(cost, p0, p1)`.
pub fn two_step_ramp(fuel: Fuel, prices: [f64; 2], load: [f64; 2], p_max: usize, ramp: f64) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for p0 in 0..=p_max {
        for p1 in 0..=p_max {
            let (p0, p1) = (p0 as f64, p1 as f64);
            if (p1 - p0).abs() > ramp {
                continue;
            }
            let cost = fuel.cost(p0) + fuel.cost(p1) - prices[0] * (p0 - load[0]) - prices[1] * (p1 - load[1]);
            if cost < best.0 {
                best = (cost, p0, p1);
            }
        }
    }
    best
}

/// Battery with no generator: best two-step schedule where each step is pure
/// charge (`net > 0`) or pure discharge, on a `res` kW grid. Returns the
/// cost, or `None` if no schedule keeps SOC in bounds.
#[allow(clippy::too_many_arguments)]
pub fn two_step_storage(
    prices: [f64; 2],
    load: [f64; 2],
    soc0: f64,
    soc_bounds: (f64, f64),
    cap_kwh: f64,
    p_max: f64,
    eta: f64,
    res: f64,
) -> Option<f64> {
    let steps = (p_max / res).round() as i64;
    let soc_next = |soc: f64, net: f64| {
        if net >= 0.0 {
            soc + net * eta / cap_kwh
        } else {
            soc + net / eta / cap_kwh
        }
    };
    let ok = |s: f64| s >= soc_bounds.0 - 1e-12 && s <= soc_bounds.1 + 1e-12;
    let mut best: Option<f64> = None;
    for k0 in -steps..=steps {
        let n0 = k0 as f64 * res;
        let s1 = soc_next(soc0, n0);
        if !ok(s1) {
            continue;
        }
        for k1 in -steps..=steps {
            let n1 = k1 as f64 * res;
            if !ok(soc_next(s1, n1)) {
                continue;
            }
            // export = −load − charge
            let cost = prices[0] * (load[0] + n0) + prices[1] * (load[1] + n1);
            if best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
    }
    best
}
