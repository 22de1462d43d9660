use mbps_core::decomposition::{
    component_mean_returns, markowitz_variance, price_variance_decomposition,
    return_variance_decomposition, PortfolioStats,
};
use mbps_core::pair::{price_covariance, PairMatrix};
use mbps_core::portfolio::{aggregate, Portfolio};
use mbps_core::security::{price_variance, vwap};
use mbps_core::trade::{rescale, TradeSeries};
use mbps_core::verify::{portfolio_moments, relative_error, weighted_price_variance};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    relative_error(a, b) <= tol || (a - b).abs() <= 1e-14 * scale
}

fn series_strategy(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.1f64..10.0, n),
        prop::collection::vec(0.1f64..10.0, n),
    )
}

type Columns = Vec<(Vec<f64>, Vec<f64>)>;

/// J securities sharing N ticks, plus holdings and composition prices.
fn market_strategy() -> impl Strategy<Value = (Columns, Vec<f64>, Vec<f64>)> {
    (1usize..=4, 1usize..=24).prop_flat_map(|(j, n)| {
        (
            prop::collection::vec(series_strategy(n), j),
            prop::collection::vec(1.0f64..100.0, j),
            prop::collection::vec(0.5f64..20.0, j),
        )
    })
}

fn build(cols: &[(Vec<f64>, Vec<f64>)]) -> Vec<TradeSeries> {
    cols.iter()
        .enumerate()
        .map(|(j, (c, u))| TradeSeries::from_columns(format!("S{j}"), c, u).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rescaling_leaves_price_moments_unchanged(
        (c, u) in (1usize..32).prop_flat_map(series_strategy),
        lambda in prop::sample::select(vec![1e-3, 1.0, 1e3, 0.37]),
    ) {
        let s = TradeSeries::from_columns("A", &c, &u).unwrap();
        let r = rescale(&s, lambda).unwrap();
        let p = vwap(&s);
        prop_assert!(close(vwap(&r), p, 1e-12, p));
        prop_assert!(close(price_variance(&r).unwrap(), price_variance(&s).unwrap(), 1e-12, p * p));
    }

    #[test]
    fn price_covariance_is_symmetric_and_matches_variance_on_diagonal(
        (a, b) in (1usize..32).prop_flat_map(|n| (series_strategy(n), series_strategy(n))),
    ) {
        let sa = TradeSeries::from_columns("A", &a.0, &a.1).unwrap();
        let sb = TradeSeries::from_columns("B", &b.0, &b.1).unwrap();
        let scale = vwap(&sa) * vwap(&sb);
        prop_assert!(close(price_covariance(&sa, &sb).unwrap(), price_covariance(&sb, &sa).unwrap(), 1e-12, scale));
        let v = weighted_price_variance(&a.0, &a.1).unwrap();
        prop_assert!(close(price_covariance(&sa, &sa).unwrap(), v, 1e-12, vwap(&sa).powi(2)));
    }

    #[test]
    fn normalization_conserves_holdings((cols, holdings, prices) in market_strategy()) {
        let series = build(&cols);
        let ids: Vec<&str> = series.iter().map(|s| s.security_id()).collect();
        let portfolio = Portfolio::compose(&ids, &holdings, &prices).unwrap();
        let ps = aggregate(&portfolio, &series, 10.0).unwrap();
        for (s, h) in ps.normalized.iter().zip(&holdings) {
            let total: f64 = s.volumes().iter().sum();
            prop_assert!(relative_error(total, *h) <= 1e-12);
        }
        let w: f64 = ps.aggregate.volumes().iter().sum();
        prop_assert!(relative_error(w, portfolio.total_volume) <= 1e-12);
    }

    #[test]
    fn quartic_decompositions_match_oracle((cols, holdings, prices) in market_strategy()) {
        let series = build(&cols);
        let ids: Vec<&str> = series.iter().map(|s| s.security_id()).collect();
        let portfolio = Portfolio::compose(&ids, &holdings, &prices).unwrap();
        let ps = aggregate(&portfolio, &series, 10.0).unwrap();
        let pairs = PairMatrix::compute(&ps.normalized).unwrap();
        let stats = PortfolioStats::compute(&ps).unwrap();
        let oracle = portfolio_moments(&ps.aggregate.values(), &ps.aggregate.volumes(), portfolio.price).unwrap();

        let price = price_variance_decomposition(&portfolio, &pairs, &pairs.mean_prices, stats.volume_dispersion).unwrap();
        prop_assert!(close(price.total, oracle.price_variance, 1e-10, oracle.mean_price.powi(2)),
            "{} vs {}", price.total, oracle.price_variance);
        let returns = component_mean_returns(&portfolio, &ps).unwrap();
        let ret = return_variance_decomposition(&portfolio, &pairs, &returns, stats.volume_dispersion).unwrap();
        prop_assert!(close(ret.total, oracle.return_variance, 1e-10, oracle.mean_return.powi(2)),
            "{} vs {}", ret.total, oracle.return_variance);
    }

    #[test]
    fn constant_volumes_reduce_to_quadratic_form(
        (cols, holdings, prices) in market_strategy(),
        fixed in prop::collection::vec(0.1f64..10.0, 4),
    ) {
        let flat: Vec<(Vec<f64>, Vec<f64>)> = cols
            .iter()
            .zip(&fixed)
            .map(|((c, u), v)| (c.clone(), vec![*v; u.len()]))
            .collect();
        let series = build(&flat);
        let ids: Vec<&str> = series.iter().map(|s| s.security_id()).collect();
        let portfolio = Portfolio::compose(&ids, &holdings, &prices).unwrap();
        let ps = aggregate(&portfolio, &series, 10.0).unwrap();
        let stats = PortfolioStats::compute(&ps).unwrap();
        let theta = PairMatrix::compute(&series).unwrap().frequency_return_cov(&prices).unwrap();
        let mk = markowitz_variance(&theta, &portfolio.value_weights).unwrap();
        prop_assert!(close(mk, stats.return_variance, 1e-12, stats.mean_return.powi(2)),
            "{} vs {}", mk, stats.return_variance);
    }
}
