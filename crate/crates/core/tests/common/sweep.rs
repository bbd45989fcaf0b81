//! Backward/forward sweep load flow for radial networks, written against the
//! raw branch list with complex arithmetic (no admittance matrix, no Jacobian).

use mgcoop::grid::{InjectionSet, NetworkModel};
use nalgebra::Complex;

pub struct SweepResult {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub iterations: usize,
}

pub fn sweep(net: &NetworkModel, inj: &InjectionSet, slack_v: f64, tol: f64) -> SweepResult {
    let n = net.n_buses();
    let slack = net.slack_index();
    // parent pointers and BFS order from the slack
    let mut parent = vec![usize::MAX; n];
    let mut parent_branch = vec![usize::MAX; n];
    let mut order = vec![slack];
    let mut seen = vec![false; n];
    seen[slack] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for (k, br) in net.branches.iter().enumerate() {
            let a = net.bus_index(br.from).unwrap();
            let b = net.bus_index(br.to).unwrap();
            let other = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                parent[other] = u;
                parent_branch[other] = k;
                order.push(other);
            }
        }
    }
    assert_eq!(order.len(), n, "network must be connected");
    assert_eq!(net.branches.len(), n - 1, "sweep oracle needs a radial network");

    let mut v = vec![Complex::new(slack_v, 0.0); n];
    for it in 1..=500 {
        // backward: branch currents from load currents
        let mut current = vec![Complex::new(0.0, 0.0); n];
        for &i in order.iter().rev() {
            let s_withdrawn = Complex::new(-inj.p[i], -inj.q[i]);
            current[i] += (s_withdrawn / v[i]).conj();
            if i != slack {
                let up = current[i];
                current[parent[i]] += up;
            }
        }
        // forward: voltage drops down the tree
        let mut next = v.clone();
        next[slack] = Complex::new(slack_v, 0.0);
        for &i in order.iter().skip(1) {
            let br = &net.branches[parent_branch[i]];
            let z = Complex::new(br.r, br.x);
            next[i] = next[parent[i]] - z * current[i];
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        v = next;
        if delta < tol {
            return SweepResult {
                v: v.iter().map(|c| c.norm()).collect(),
                theta: v.iter().map(|c| c.arg()).collect(),
                iterations: it,
            };
        }
    }
    panic!("sweep oracle did not converge");
}

/// Bisection on a scalar function with a sign change in `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Power drawn from the slack bus into the network (pu), from the branch
/// currents leaving it.
pub fn substation_power(net: &NetworkModel, res: &SweepResult) -> (f64, f64) {
    let slack = net.slack_index();
    let phasor = |i: usize| Complex::from_polar(res.v[i], res.theta[i]);
    let vs = phasor(slack);
    let mut s = Complex::new(0.0, 0.0);
    for br in &net.branches {
        let a = net.bus_index(br.from).unwrap();
        let b = net.bus_index(br.to).unwrap();
        let other = if a == slack {
            b
        } else if b == slack {
            a
        } else {
            continue;
        };
        let i = (vs - phasor(other)) / Complex::new(br.r, br.x);
        s += vs * i.conj();
    }
    (s.re, s.im)
}
