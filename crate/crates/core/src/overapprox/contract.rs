use super::{DataPoint, OverapproxError};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};

/// Tightens prior enclosures of `f(x)` and `g(x)` at a datapoint using the
/// measured `ẋ₂ = f + g u`, column by column in natural order.
pub fn contract(
    d: &DataPoint,
    f_prior: &IntervalVector,
    g_prior: &IntervalMatrix,
) -> Result<(IntervalVector, IntervalMatrix), OverapproxError> {
    let order: Vec<usize> = (0..g_prior.cols()).collect();
    contract_ordered(d, f_prior, g_prior, &order)
}

/// As [`contract`] with an explicit column processing order.
pub fn contract_ordered(
    d: &DataPoint,
    f_prior: &IntervalVector,
    g_prior: &IntervalMatrix,
    order: &[usize],
) -> Result<(IntervalVector, IntervalMatrix), OverapproxError> {
    let n = f_prior.len();
    let m = g_prior.cols();
    if g_prior.rows() != n || d.u.len() != m || d.x_dot.len() != 2 * n {
        return Err(OverapproxError::Dimension(format!(
            "contract: n={n}, G {}x{}, u {}, x_dot {}",
            g_prior.rows(),
            m,
            d.u.len(),
            d.x_dot.len()
        )));
    }
    let mut seen = vec![false; m];
    if order.len() != m || !order.iter().all(|&l| l < m && !std::mem::replace(&mut seen[l], true)) {
        return Err(OverapproxError::Invalid(format!("column order {order:?} is not a permutation of 0..{m}")));
    }

    let mut cf_out = f_prior.clone();
    let mut cg_out = g_prior.clone();
    for k in 0..n {
        let fail = |_| OverapproxError::Contradiction { datapoint: None, row: k };
        let xd = Interval::point(d.x_dot[n + k]);
        let terms: Vec<Interval> = order.iter().map(|&l| g_prior.get(k, l) * d.u[l]).collect();
        let zero = Interval::point(0.0);
        let y = terms.iter().fold(zero, |a, &b| a + b);

        let cf = f_prior[k].intersect(&(xd - y)).map_err(fail)?;
        let mut s = (xd - cf).intersect(&y).map_err(fail)?;
        for (pos, &l) in order.iter().enumerate() {
            let rest = terms[pos + 1..].iter().fold(zero, |a, &b| a + b);
            let ul = d.u[l];
            let cg = if ul != 0.0 {
                let t = (s - rest).intersect(&terms[pos]).map_err(fail)?;
                t.div_scalar(ul).intersect(&g_prior.get(k, l)).map_err(fail)?
            } else {
                g_prior.get(k, l)
            };
            s = (s - cg * ul).intersect(&rest).map_err(fail)?;
            cg_out.set(k, l, cg);
        }
        cf_out[k] = cf;
    }
    Ok((cf_out, cg_out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(xd: f64, u: f64) -> DataPoint {
        DataPoint { x: vec![0.0, 0.0], x_dot: vec![0.0, xd], u: vec![u], t: 0.0 }
    }

    #[test]
    fn scalar_hand_trace() {
        let f = IntervalVector::new(vec![Interval::new(0.0, 2.0)]);
        let g = IntervalMatrix::filled(1, 1, Interval::new(0.0, 4.0));
        let (cf, cg) = contract(&dp(3.0, 1.0), &f, &g).unwrap();
        assert_eq!(cf[0], Interval::new(0.0, 2.0));
        assert_eq!(cg.get(0, 0), Interval::new(1.0, 3.0));
    }

    #[test]
    fn zero_input_keeps_g() {
        let f = IntervalVector::new(vec![Interval::new(-5.0, 5.0)]);
        let g = IntervalMatrix::filled(1, 1, Interval::new(0.0, 4.0));
        let (cf, cg) = contract(&dp(1.5, 0.0), &f, &g).unwrap();
        assert_eq!(cf[0], Interval::point(1.5));
        assert_eq!(cg.get(0, 0), Interval::new(0.0, 4.0));
    }

    #[test]
    fn exact_priors_are_fixed() {
        let f = IntervalVector::new(vec![Interval::point(1.0)]);
        let g = IntervalMatrix::filled(1, 1, Interval::point(2.0));
        let (cf, cg) = contract(&dp(1.0 + 2.0 * 0.7, 0.7), &f, &g).unwrap();
        assert_eq!(cf, f);
        assert_eq!(cg, g);
    }

    #[test]
    fn contradiction_is_reported() {
        let f = IntervalVector::new(vec![Interval::new(0.0, 1.0)]);
        let g = IntervalMatrix::filled(1, 1, Interval::new(0.0, 1.0));
        assert!(matches!(
            contract(&dp(10.0, 1.0), &f, &g),
            Err(OverapproxError::Contradiction { row: 0, .. })
        ));
    }

    #[test]
    fn bad_order_rejected() {
        let f = IntervalVector::new(vec![Interval::new(0.0, 1.0)]);
        let g = IntervalMatrix::filled(1, 2, Interval::new(0.0, 1.0));
        let d = DataPoint { x: vec![0.0, 0.0], x_dot: vec![0.0, 0.5], u: vec![1.0, 1.0], t: 0.0 };
        assert!(contract_ordered(&d, &f, &g, &[0, 0]).is_err());
        assert!(contract_ordered(&d, &f, &g, &[1, 0]).is_ok());
    }
}
