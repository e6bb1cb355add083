//! Poisson statistics of activated emitters per spot.

use super::StatsError;

/// Truncation point of the pmf: tail mass beyond it is below 1e-12 for
/// every mean of practical interest.
pub fn truncation(lambda: f64) -> usize {
    20usize.max((lambda + 10.0 * lambda.sqrt()).ceil() as usize)
}

/// P(k; λ) for k = 0..=k_max, evaluated in log space so large means do not
/// underflow e^(-λ).
pub fn poisson_spot_distribution(lambda: f64) -> Result<Vec<f64>, StatsError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(StatsError::Domain(format!("Poisson mean must be >= 0, got {lambda}")));
    }
    let k_max = truncation(lambda);
    if lambda == 0.0 {
        let mut pmf = vec![0.0; k_max + 1];
        pmf[0] = 1.0;
        return Ok(pmf);
    }
    let ln_l = lambda.ln();
    let mut ln_p = -lambda;
    let mut pmf = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            ln_p += ln_l - (k as f64).ln();
        }
        pmf.push(ln_p.exp());
    }
    Ok(pmf)
}

/// Probability that a spot holds exactly one emitter.
pub fn single_emitter_fraction(lambda: f64) -> Result<f64, StatsError> {
    Ok(poisson_spot_distribution(lambda)?[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(poisson_spot_distribution(0.0).unwrap()[0], 1.0);
        assert_eq!(single_emitter_fraction(0.0).unwrap(), 0.0);
        assert!((single_emitter_fraction(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((single_emitter_fraction(2.0).unwrap() - 2.0 * (-2f64).exp()).abs() < 1e-15);
        assert!(poisson_spot_distribution(-0.1).is_err());
    }

    #[test]
    fn large_mean_normalizes() {
        let pmf = poisson_spot_distribution(800.0).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
