use super::RlError;

/// Discounted revenue of the cooperative over the decision window.
///
/// `R = Σ_t γ^t (λ^W_t P^W_t − Σ_n λ^R_{n,t} P^PCC_{n,t})`, with `P^W ≤ 0` an
/// import from the wholesale market and `P^PCC ≥ 0` an export from a
/// microgrid. `retail` and `pcc_kw` are indexed `[mg][step]`.
pub fn compute_reward(
    wholesale_price: &[f64],
    p_w_kw: &[f64],
    retail: &[Vec<f64>],
    pcc_kw: &[Vec<f64>],
    gamma: f64,
) -> Result<f64, RlError> {
    let t_len = wholesale_price.len();
    if p_w_kw.len() != t_len {
        return Err(RlError::Dimension { what: "wholesale exchange", expected: t_len, got: p_w_kw.len() });
    }
    if retail.len() != pcc_kw.len() {
        return Err(RlError::Dimension { what: "microgrid series", expected: retail.len(), got: pcc_kw.len() });
    }
    for (r, p) in retail.iter().zip(pcc_kw) {
        if r.len() != t_len || p.len() != t_len {
            return Err(RlError::Dimension { what: "window steps", expected: t_len, got: r.len().min(p.len()) });
        }
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(RlError::Invalid(format!("discount factor {gamma} outside [0, 1]")));
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for t in 0..t_len {
        let retail_paid: f64 = retail.iter().zip(pcc_kw).map(|(r, p)| r[t] * p[t]).sum();
        total += discount * (wholesale_price[t] * p_w_kw[t] - retail_paid);
        discount *= gamma;
    }
    Ok(total)
}
