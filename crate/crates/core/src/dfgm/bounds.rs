use crate::error::{Error, Result};
use crate::network::Laplacian;

fn positive(v: f64, name: &'static str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveParameter(name))
    }
}

fn degree_ratio(lap: &Laplacian) -> Result<f64> {
    positive(lap.d_min() as f64, "d_min")?;
    Ok(lap.d_max() as f64 / lap.d_min() as f64)
}

/// Ceiling that does not round an exact integer up because of a trailing ulp.
fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Rounds guaranteeing an `eps` duality gap for gradient bound `G`:
/// `ceil(sqrt(16 G^2 d_max / (gamma eps d_min)))`.
pub fn iteration_bound(g_bound: f64, gamma: f64, eps: f64, lap: &Laplacian) -> Result<u64> {
    let g = positive(g_bound, "G")?;
    let gamma = positive(gamma, "gamma")?;
    let eps = positive(eps, "eps")?;
    let ratio = degree_ratio(lap)?;
    Ok(ceil_count((16.0 * g * g * ratio / (gamma * eps)).sqrt()))
}

/// Regularization `eps / (4 m ln n)` that makes the regularized barycenter an
/// `eps`-solution of the unregularized problem, with the matching round count.
pub fn gamma_for_unregularized(
    eps: f64,
    m: usize,
    n: usize,
    g_bound: f64,
    lap: &Laplacian,
) -> Result<(f64, u64)> {
    let eps = positive(eps, "eps")?;
    if n < 2 {
        return Err(Error::NTooSmall(n));
    }
    positive(m as f64, "m")?;
    let gamma = eps / (4.0 * m as f64 * (n as f64).ln());
    Ok((gamma, unregularized_iteration_bound(g_bound, eps, m, n, lap)?))
}

/// `ceil(sqrt(128 G^2 m ln n / eps^2 * d_max / d_min))`.
pub fn unregularized_iteration_bound(
    g_bound: f64,
    eps: f64,
    m: usize,
    n: usize,
    lap: &Laplacian,
) -> Result<u64> {
    let g = positive(g_bound, "G")?;
    let eps = positive(eps, "eps")?;
    if n < 2 {
        return Err(Error::NTooSmall(n));
    }
    positive(m as f64, "m")?;
    let ratio = degree_ratio(lap)?;
    let arg = 128.0 * g * g * m as f64 * (n as f64).ln() / (eps * eps) * ratio;
    Ok(ceil_count(arg.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_graph, laplacian, GraphKind};

    fn lap(kind: GraphKind, m: usize) -> Laplacian {
        laplacian(&generate_graph(kind, m, None, 0).unwrap())
    }

    #[test]
    fn iteration_bound_examples() {
        let complete = lap(GraphKind::Complete, 10);
        assert_eq!(iteration_bound(1.0, 0.1, 0.01, &complete).unwrap(), 127);
        // Exact square: 16 * 25 / (1 * 1) = 400 -> 20, star ratio 9 -> 60.
        assert_eq!(iteration_bound(5.0, 1.0, 1.0, &complete).unwrap(), 20);
        assert_eq!(iteration_bound(5.0, 1.0, 1.0, &lap(GraphKind::Star, 10)).unwrap(), 60);
        // Halving eps scales by sqrt(2): sqrt(16 * 2) = 5.657 -> 6.
        assert_eq!(iteration_bound(1.0, 1.0, 1.0, &complete).unwrap(), 4);
        assert_eq!(iteration_bound(1.0, 1.0, 0.5, &complete).unwrap(), 6);
        assert!(iteration_bound(0.0, 1.0, 1.0, &complete).is_err());
        assert!(iteration_bound(1.0, 1.0, 1.0, &lap(GraphKind::Complete, 1)).is_err());
    }

    #[test]
    fn gamma_examples() {
        let l = lap(GraphKind::Complete, 10);
        let (g, _) = gamma_for_unregularized(0.4, 10, 3, 1.0, &l).unwrap();
        assert_eq!(g, 0.4 / (40.0 * 3f64.ln()));
        let (g2, _) = gamma_for_unregularized(0.4, 20, 3, 1.0, &l).unwrap();
        assert!((g2 - g / 2.0).abs() < 1e-18);
        let (g3, _) = gamma_for_unregularized(0.4, 10, 4, 1.0, &l).unwrap();
        assert!(g3 < g);
        assert!(matches!(
            gamma_for_unregularized(0.4, 10, 1, 1.0, &l),
            Err(Error::NTooSmall(1))
        ));
        assert!(gamma_for_unregularized(-0.4, 10, 3, 1.0, &l).is_err());
    }
}
