//! Market-based covariances of prices and returns between two securities.
//!
//! For securities `j` and `k` traded on the same tick grid the price
//! covariance is averaged with the joint weights `U_j(t_i) U_k(t_i)`:
//!
//! ```text
//! σ_jk = [cov{C_j,C_k} − p_k cov{C_j,U_k} − p_j cov{U_j,C_k} + p_j p_k cov{U_j,U_k}] / U_jk
//! U_jk = E[U_j U_k]
//! ```
//!
//! The same quantity expressed through covariances normalized to unit means
//! (`ψ`, `φ`, `χ`) is computed by [`price_covariance_normalized_form`].

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::security::{check_reference_price, vwap};
use crate::trade::{covariance, mean, TradeSeries};

/// Covariances of two value/volume series normalized by their means.
///
/// `value_volume` is `φ_jk = cov{C_j,U_k} / (C_j U_k)` and `volume_value` is
/// `φ_kj = cov{C_k,U_j} / (C_k U_j)`; they differ in general.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoefficients {
    pub value_value: f64,
    pub value_volume: f64,
    pub volume_value: f64,
    pub volume_volume: f64,
}

impl NormalizedCoefficients {
    /// `(φ_jk + φ_kj) / 2`, the cross term that multiplies `−2 p_j p_k`.
    pub fn symmetric_cross(&self) -> f64 {
        0.5 * (self.value_volume + self.volume_value)
    }
}

/// Covariance structure of a pair of securities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub value_value_cov: f64,
    /// `cov{C_j, U_k}`
    pub value_volume_cov: f64,
    /// `cov{U_j, C_k}`
    pub volume_value_cov: f64,
    pub volume_volume_cov: f64,
    pub joint_volume_moment: f64,
    pub mean_price_j: f64,
    pub mean_price_k: f64,
    pub coefficients: NormalizedCoefficients,
    pub price_cov: f64,
}

impl PairStats {
    pub fn compute(sj: &TradeSeries, sk: &TradeSeries) -> Result<Self> {
        sj.ensure_aligned(sk)?;
        let (cj, uj) = (sj.values(), sj.volumes());
        let (ck, uk) = (sk.values(), sk.volumes());
        let value_value_cov = covariance(&cj, &ck)?;
        let value_volume_cov = covariance(&cj, &uk)?;
        let volume_value_cov = covariance(&uj, &ck)?;
        let volume_volume_cov = covariance(&uj, &uk)?;
        let joint: Vec<f64> = uj.iter().zip(&uk).map(|(a, b)| a * b).collect();
        let joint_volume_moment = mean(&joint)?;
        let pj = vwap(sj);
        let pk = vwap(sk);

        let price_cov = (value_value_cov - pk * value_volume_cov - pj * volume_value_cov
            + pj * pk * volume_volume_cov)
            / joint_volume_moment;

        let (mcj, muj) = (mean(&cj)?, mean(&uj)?);
        let (mck, muk) = (mean(&ck)?, mean(&uk)?);
        for (label, m) in [("value", mcj), ("volume", muj), ("value", mck), ("volume", muk)] {
            if m == 0.0 || !m.is_finite() {
                return Err(Error::DegenerateNormalization(format!(
                    "mean {label} of '{}'/'{}' is {m}",
                    sj.security_id(),
                    sk.security_id()
                )));
            }
        }
        let coefficients = NormalizedCoefficients {
            value_value: value_value_cov / (mcj * mck),
            value_volume: value_volume_cov / (mcj * muk),
            volume_value: volume_value_cov / (muj * mck),
            volume_volume: volume_volume_cov / (muj * muk),
        };

        Ok(Self {
            value_value_cov,
            value_volume_cov,
            volume_value_cov,
            volume_volume_cov,
            joint_volume_moment,
            mean_price_j: pj,
            mean_price_k: pk,
            coefficients,
            price_cov,
        })
    }
}

/// Market-based price covariance `σ_jk` from value/volume covariances.
pub fn price_covariance(sj: &TradeSeries, sk: &TradeSeries) -> Result<f64> {
    Ok(PairStats::compute(sj, sk)?.price_cov)
}

pub fn normalized_coefficients(sj: &TradeSeries, sk: &TradeSeries) -> Result<NormalizedCoefficients> {
    Ok(PairStats::compute(sj, sk)?.coefficients)
}

/// `σ_jk = [ψ_jk − 2 φ̄_jk + χ_jk] / (1 + χ_jk) · p_j p_k` with the
/// symmetrized cross coefficient `φ̄_jk = (φ_jk + φ_kj) / 2`.
pub fn price_covariance_normalized_form(sj: &TradeSeries, sk: &TradeSeries) -> Result<f64> {
    let stats = PairStats::compute(sj, sk)?;
    let c = stats.coefficients;
    let denom = 1.0 + c.volume_volume;
    if denom.abs() < 1e-12 {
        return Err(Error::SingularJointVolume(denom));
    }
    Ok((c.value_value - 2.0 * c.symmetric_cross() + c.volume_volume) / denom
        * stats.mean_price_j
        * stats.mean_price_k)
}

/// Market-based return covariance `θ_jk = σ_jk / (p_j(t0) p_k(t0))`.
pub fn return_covariance(sj: &TradeSeries, sk: &TradeSeries, p0_j: f64, p0_k: f64) -> Result<f64> {
    check_reference_price(p0_j)?;
    check_reference_price(p0_k)?;
    Ok(price_covariance(sj, sk)? / (p0_j * p0_k))
}

/// `θ_jk` through past values `C_0j(t_i) = p_j(t0) U_j(t_i)`:
///
/// ```text
/// θ_jk = [cov{C_j,C_k} − R_k cov{C_j,C_0k} − R_j cov{C_0j,C_k} + R_j R_k cov{C_0j,C_0k}] / C_0jk
/// ```
pub fn return_covariance_past_value_form(
    sj: &TradeSeries,
    sk: &TradeSeries,
    p0_j: f64,
    p0_k: f64,
) -> Result<f64> {
    check_reference_price(p0_j)?;
    check_reference_price(p0_k)?;
    sj.ensure_aligned(sk)?;
    let (cj, ck) = (sj.values(), sk.values());
    let c0j: Vec<f64> = sj.volumes().iter().map(|u| p0_j * u).collect();
    let c0k: Vec<f64> = sk.volumes().iter().map(|u| p0_k * u).collect();
    let rj = mean(&cj)? / mean(&c0j)?;
    let rk = mean(&ck)? / mean(&c0k)?;
    let joint: Vec<f64> = c0j.iter().zip(&c0k).map(|(a, b)| a * b).collect();
    let c0jk = mean(&joint)?;
    Ok((covariance(&cj, &ck)? - rk * covariance(&cj, &c0k)? - rj * covariance(&c0j, &ck)?
        + rj * rk * covariance(&c0j, &c0k)?)
        / c0jk)
}

/// Unweighted population covariance of the two price sequences.
pub fn frequency_price_covariance(sj: &TradeSeries, sk: &TradeSeries) -> Result<f64> {
    sj.ensure_aligned(sk)?;
    covariance(&sj.prices(), &sk.prices())
}

/// Unweighted population covariance of the two gross-return sequences.
pub fn frequency_return_covariance(
    sj: &TradeSeries,
    sk: &TradeSeries,
    p0_j: f64,
    p0_k: f64,
) -> Result<f64> {
    check_reference_price(p0_j)?;
    check_reference_price(p0_k)?;
    Ok(frequency_price_covariance(sj, sk)? / (p0_j * p0_k))
}

/// Pairwise statistics for every ordered pair `(j, k)` of a security set.
#[derive(Debug, Clone)]
pub struct PairMatrix {
    pub mean_prices: Vec<f64>,
    pub price_cov: DMatrix<f64>,
    pub value_value: DMatrix<f64>,
    pub value_volume: DMatrix<f64>,
    pub volume_volume: DMatrix<f64>,
    pub frequency_price_cov: DMatrix<f64>,
}

impl PairMatrix {
    pub fn compute(series: &[TradeSeries]) -> Result<Self> {
        let j = series.len();
        let mut price_cov = DMatrix::zeros(j, j);
        let mut value_value = DMatrix::zeros(j, j);
        let mut value_volume = DMatrix::zeros(j, j);
        let mut volume_volume = DMatrix::zeros(j, j);
        let mut frequency_price_cov = DMatrix::zeros(j, j);
        for (a, sa) in series.iter().enumerate() {
            for (b, sb) in series.iter().enumerate() {
                let stats = PairStats::compute(sa, sb)?;
                price_cov[(a, b)] = stats.price_cov;
                value_value[(a, b)] = stats.coefficients.value_value;
                value_volume[(a, b)] = stats.coefficients.value_volume;
                volume_volume[(a, b)] = stats.coefficients.volume_volume;
                frequency_price_cov[(a, b)] = frequency_price_covariance(sa, sb)?;
            }
        }
        Ok(Self {
            mean_prices: series.iter().map(vwap).collect(),
            price_cov,
            value_value,
            value_volume,
            volume_volume,
            frequency_price_cov,
        })
    }

    pub fn len(&self) -> usize {
        self.mean_prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_prices.is_empty()
    }

    /// `θ_jk = σ_jk / (p_j(t0) p_k(t0))`.
    pub fn return_cov(&self, reference_prices: &[f64]) -> Result<DMatrix<f64>> {
        scale_by_reference(&self.price_cov, reference_prices)
    }

    /// Frequency-based return covariances from unweighted price covariances.
    pub fn frequency_return_cov(&self, reference_prices: &[f64]) -> Result<DMatrix<f64>> {
        scale_by_reference(&self.frequency_price_cov, reference_prices)
    }

    /// Largest `|σ_jk − σ_kj|` relative to the largest entry.
    pub fn price_cov_asymmetry(&self) -> f64 {
        asymmetry(&self.price_cov)
    }

    pub fn price_cov_is_psd(&self) -> bool {
        is_positive_semidefinite(&self.price_cov)
    }
}

fn scale_by_reference(m: &DMatrix<f64>, reference_prices: &[f64]) -> Result<DMatrix<f64>> {
    if reference_prices.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: reference_prices.len(),
        });
    }
    for &p in reference_prices {
        check_reference_price(p)?;
    }
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| {
        m[(a, b)] / (reference_prices[a] * reference_prices[b])
    }))
}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut gap = 0.0_f64;
    for a in 0..m.nrows() {
        for b in (a + 1)..m.ncols() {
            gap = gap.max((m[(a, b)] - m[(b, a)]).abs());
        }
    }
    gap / scale
}

/// PSD test on the symmetric part: min eigenvalue ≥ −1e-12 · max |eigenvalue|.
pub fn is_positive_semidefinite(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return true;
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let scale = eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    eig.iter().all(|&v| v >= -1e-12 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::security::{price_variance, return_variance};
    use crate::trade::rescale;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn pair() -> (TradeSeries, TradeSeries) {
        (
            TradeSeries::from_columns("J", &[10.0, 30.0], &[1.0, 2.0]).unwrap(),
            TradeSeries::from_columns("K", &[8.0, 8.0], &[2.0, 1.0]).unwrap(),
        )
    }

    /// Direct weighted sum with joint volume weights.
    fn weighted_oracle(sj: &TradeSeries, sk: &TradeSeries) -> f64 {
        let (pj, pk) = (vwap(sj), vwap(sk));
        let (xs, ys) = (sj.prices(), sk.prices());
        let (uj, uk) = (sj.volumes(), sk.volumes());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..xs.len() {
            num += (xs[i] - pj) * (ys[i] - pk) * uj[i] * uk[i];
            den += uj[i] * uk[i];
        }
        num / den
    }

    #[test]
    fn worked_pair_matches_direct_sum() {
        let (sj, sk) = pair();
        // p_j = (10, 15), p_k = (4, 8), joint weights equal: σ = 40/9.
        let sigma = price_covariance(&sj, &sk).unwrap();
        assert!(rel(sigma, 40.0 / 9.0) < 1e-14);
        assert!(rel(sigma, weighted_oracle(&sj, &sk)) < 1e-14);
        assert!(rel(price_covariance_normalized_form(&sj, &sk).unwrap(), sigma) < 1e-14);
    }

    #[test]
    fn one_sided_cross_merge_is_not_exact_per_pair() {
        // Replacing both cross terms by 2 φ_jk only works when φ_jk == φ_kj.
        let (sj, sk) = pair();
        let stats = PairStats::compute(&sj, &sk).unwrap();
        let c = stats.coefficients;
        assert!(rel(c.value_volume, -1.0 / 6.0) < 1e-14);
        assert_eq!(c.volume_value, 0.0);
        let one_sided = (c.value_value - 2.0 * c.value_volume + c.volume_volume)
            / (1.0 + c.volume_volume)
            * stats.mean_price_j
            * stats.mean_price_k;
        assert!(rel(one_sided, 160.0 / 9.0) < 1e-14);
        assert!(rel(one_sided, stats.price_cov) > 0.5);
    }

    #[test]
    fn self_and_rescaled_covariance_equal_price_variance() {
        let (sj, _) = pair();
        let phi = price_variance(&sj).unwrap();
        assert!(rel(price_covariance(&sj, &sj).unwrap(), phi) < 1e-14);
        let scaled = rescale(&sj, 3.7).unwrap();
        assert!(rel(price_covariance(&sj, &scaled).unwrap(), phi) < 1e-13);
    }

    #[test]
    fn joint_volume_moment_factorizes() {
        let (sj, sk) = pair();
        let s = PairStats::compute(&sj, &sk).unwrap();
        let uj = mean(&sj.volumes()).unwrap();
        let uk = mean(&sk.volumes()).unwrap();
        assert!(rel(s.joint_volume_moment, uj * uk * (1.0 + s.coefficients.volume_volume)) < 1e-15);
    }

    #[test]
    fn normalized_coefficient_cases() {
        let a = TradeSeries::from_columns("A", &[3.0, 9.0, 4.0], &[2.0, 2.0, 2.0]).unwrap();
        let b = TradeSeries::from_columns("B", &[1.0, 2.0, 7.0], &[5.0, 5.0, 5.0]).unwrap();
        let c = normalized_coefficients(&a, &b).unwrap();
        assert_eq!(c.volume_volume, 0.0);
        assert_eq!(c.value_volume, 0.0);
        assert!(rel(
            price_covariance_normalized_form(&a, &b).unwrap(),
            c.value_value * vwap(&a) * vwap(&b)
        ) < 1e-14);

        let (sj, _) = pair();
        let d = normalized_coefficients(&sj, &sj).unwrap();
        let values = sj.values();
        let m = mean(&values).unwrap();
        assert!(rel(d.value_value, covariance(&values, &values).unwrap() / (m * m)) < 1e-15);

        let scaled = normalized_coefficients(&rescale(&a, 0.01).unwrap(), &rescale(&b, 50.0).unwrap()).unwrap();
        let raw = normalized_coefficients(&a, &b).unwrap();
        assert!(rel(scaled.value_value, raw.value_value) < 1e-12);
    }

    #[test]
    fn return_covariance_paths() {
        let (sj, sk) = pair();
        let sigma = price_covariance(&sj, &sk).unwrap();
        assert_eq!(return_covariance(&sj, &sk, 1.0, 1.0).unwrap(), sigma);
        assert!(rel(
            return_covariance(&sj, &sj, 10.0, 10.0).unwrap(),
            return_variance(&sj, 10.0).unwrap()
        ) < 1e-14);
        let a = TradeSeries::from_columns("A", &[3.0, 9.0, 4.0], &[1.0, 2.5, 0.7]).unwrap();
        let b = TradeSeries::from_columns("B", &[1.0, 2.0, 7.0], &[4.0, 0.3, 2.2]).unwrap();
        let direct = return_covariance(&a, &b, 2.0, 0.9).unwrap();
        let past = return_covariance_past_value_form(&a, &b, 2.0, 0.9).unwrap();
        assert!(rel(direct, past) < 1e-12);
        assert!(return_covariance(&a, &b, 0.0, 1.0).is_err());
    }

    #[test]
    fn frequency_covariances() {
        let a = TradeSeries::from_columns("A", &[3.0, 9.0, 4.0], &[2.0, 2.0, 2.0]).unwrap();
        let b = TradeSeries::from_columns("B", &[1.0, 2.0, 7.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(rel(frequency_price_covariance(&a, &b).unwrap(), price_covariance(&a, &b).unwrap()) < 1e-14);
        assert!(rel(
            frequency_return_covariance(&a, &b, 2.0, 3.0).unwrap(),
            return_covariance(&a, &b, 2.0, 3.0).unwrap()
        ) < 1e-14);
        let twin = rescale(&a, 4.0).unwrap();
        assert!(rel(
            frequency_price_covariance(&a, &twin).unwrap(),
            crate::security::frequency_price_variance(&a)
        ) < 1e-14);
        let (sj, sk) = pair();
        let f = frequency_price_covariance(&sj, &sk).unwrap();
        assert!(rel(f, 5.0) < 1e-15);
        assert!((f - price_covariance(&sj, &sk).unwrap()).abs() > 0.1);
    }

    #[test]
    fn window_mismatch_is_rejected() {
        let (sj, _) = pair();
        let short = TradeSeries::from_columns("S", &[1.0], &[1.0]).unwrap();
        assert!(matches!(price_covariance(&sj, &short), Err(Error::WindowMismatch { .. })));
        assert!(frequency_price_covariance(&sj, &short).is_err());
    }

    #[test]
    fn matrix_is_symmetric() {
        let a = TradeSeries::from_columns("A", &[3.0, 9.0, 4.0, 1.0], &[1.0, 2.5, 0.7, 3.0]).unwrap();
        let b = TradeSeries::from_columns("B", &[1.0, 2.0, 7.0, 5.0], &[4.0, 0.3, 2.2, 1.0]).unwrap();
        let c = TradeSeries::from_columns("C", &[6.0, 2.0, 2.0, 8.0], &[1.5, 1.5, 0.2, 3.3]).unwrap();
        let m = PairMatrix::compute(&[a, b, c]).unwrap();
        assert!(m.price_cov_asymmetry() < 1e-14);
        assert!(m.return_cov(&[1.0, 2.0]).is_err());
        let theta = m.return_cov(&[1.0, 2.0, 4.0]).unwrap();
        assert!(rel(theta[(1, 2)], m.price_cov[(1, 2)] / 8.0) < 1e-15);
    }

    #[test]
    fn psd_flag() {
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(is_positive_semidefinite(&good));
        assert!(!is_positive_semidefinite(&bad));
    }
}
