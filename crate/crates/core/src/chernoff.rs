//! Skewed divergences `C_alpha`, Bhattacharyya and Chernoff information
//! between truncated count distributions.
//!
//! Rates of interest go down to ~1e-9 nats, far below the rounding error of
//! `sum p^a q^(1-a)` itself. We therefore accumulate
//!
//! ```text
//! S = sum_x [ a p(x) + (1 - a) q(x) - p(x)^a q(x)^(1-a) ]
//! ```
//!
//! whose terms are all nonnegative (weighted AM-GM) and are evaluated without
//! cancellation, and report `C_a = -ln(1 - S)`. Mass outside the grid both
//! pmfs resolve, recorded tails included, is pooled into a single cell, so
//! the result is a lower bound that misses only the gap inside that pool. When `S >= 1/2` the overlap is small enough that a
//! max-shifted log-sum-exp of `a ln p + (1 - a) ln q` is the accurate route.
//!
//! A cell where either pmf vanishes contributes nothing to the overlap for
//! every `alpha`, including the endpoints.

use crate::error::{domain, Result};
use crate::photon_stats::{Pmf1D, Pmf2D};

/// Default width of the final alpha bracket.
pub const DEFAULT_ALPHA_TOL: f64 = 1e-10;

/// A pmf laid out on a (row, column) count grid. 1D pmfs are a single column.
pub trait MassFunction {
    fn shape(&self) -> (usize, usize);
    fn mass(&self, row: usize, col: usize) -> f64;
    /// Mass cut off beyond the grid.
    fn tail(&self) -> f64;
}

impl MassFunction for Pmf1D {
    fn shape(&self) -> (usize, usize) {
        (self.len(), 1)
    }

    fn mass(&self, row: usize, col: usize) -> f64 {
        if col == 0 {
            self.get(row)
        } else {
            0.0
        }
    }

    fn tail(&self) -> f64 {
        self.tail_mass()
    }
}

impl MassFunction for Pmf2D {
    fn shape(&self) -> (usize, usize) {
        self.dims()
    }

    fn mass(&self, row: usize, col: usize) -> f64 {
        self.get(row, col)
    }

    fn tail(&self) -> f64 {
        self.tail_mass()
    }
}

/// Optimal exponent and where it was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    /// Nats per mode-group; `+inf` when `disjoint`.
    pub rate: f64,
    pub alpha_star: f64,
    /// Width of the alpha bracket when the search stopped.
    pub achieved_tol: f64,
    /// The supports do not overlap, so the hypotheses are perfectly
    /// distinguishable.
    pub disjoint: bool,
}

impl RateResult {
    fn finite(rate: f64, alpha_star: f64, achieved_tol: f64) -> Self {
        Self {
            rate,
            alpha_star,
            achieved_tol,
            disjoint: false,
        }
    }

    fn infinite() -> Self {
        Self {
            rate: f64::INFINITY,
            alpha_star: 0.5,
            achieved_tol: 0.0,
            disjoint: true,
        }
    }
}

/// `alpha * a + (1 - alpha) * b - a^alpha * b^(1 - alpha)` for `a, b > 0`,
/// given `log_ratio = ln(a / b)`. Always `>= 0`.
pub(crate) fn skew_gap(alpha: f64, a: f64, b: f64, log_ratio: f64) -> f64 {
    if log_ratio <= 0.0 {
        b * gap_kernel(alpha, log_ratio)
    } else {
        a * gap_kernel(1.0 - alpha, -log_ratio)
    }
}

/// `alpha e^r + (1 - alpha) - e^(alpha r)` for `r <= 0`.
fn gap_kernel(alpha: f64, r: f64) -> f64 {
    if r == 0.0 || alpha == 0.0 || alpha == 1.0 {
        return 0.0;
    }
    if r >= -1.0 {
        // sum_{k>=2} (alpha - alpha^k) r^k / k!
        let mut sum = 0.0;
        let mut power = r;
        let mut alpha_pow = alpha;
        for k in 2..60 {
            power *= r / k as f64;
            alpha_pow *= alpha;
            let term = (alpha - alpha_pow) * power;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum.max(0.0)
    } else {
        (alpha * r.exp_m1() - (alpha * r).exp_m1()).max(0.0)
    }
}

struct Cell {
    p: f64,
    q: f64,
    log_p: f64,
    log_q: f64,
    log_ratio: f64,
}

/// Two pmfs aligned on the union of their grids, logs precomputed so the
/// alpha search only pays for exponentials.
struct AlignedPair {
    shared: Vec<Cell>,
    p_only: f64,
    q_only: f64,
}

impl AlignedPair {
    fn new<P: MassFunction>(p: &P, q: &P) -> Self {
        let (pr, pc) = p.shape();
        let (qr, qc) = q.shape();
        // A grid without tail mass is exact, with zeros beyond its edge.
        let (pr, pc) = if p.tail() > 0.0 { (pr, pc) } else { (usize::MAX, usize::MAX) };
        let (qr, qc) = if q.tail() > 0.0 { (qr, qc) } else { (usize::MAX, usize::MAX) };
        let (rows, cols) = (p.shape().0.max(q.shape().0), p.shape().1.max(q.shape().1));
        let mut pair = Self {
            shared: Vec::new(),
            p_only: 0.0,
            q_only: 0.0,
        };
        // Mass outside the common grid, tails included, is pooled into one
        // extra cell per law. Pooling can only shrink the divergence.
        let mut p_rest = p.tail();
        let mut q_rest = q.tail();
        for row in 0..rows {
            for col in 0..cols {
                let a = p.mass(row, col);
                let b = q.mass(row, col);
                let common = row < pr.min(qr) && col < pc.min(qc);
                if common {
                    pair.push(a, b);
                } else {
                    p_rest += a;
                    q_rest += b;
                }
            }
        }
        pair.push(p_rest, q_rest);
        pair
    }

    fn push(&mut self, a: f64, b: f64) {
        match (a > 0.0, b > 0.0) {
            (true, true) => {
                let (log_p, log_q) = (a.ln(), b.ln());
                self.shared.push(Cell {
                    p: a,
                    q: b,
                    log_p,
                    log_q,
                    log_ratio: log_p - log_q,
                });
            }
            (true, false) => self.p_only += a,
            (false, true) => self.q_only += b,
            (false, false) => {}
        }
    }

    fn c_alpha(&self, alpha: f64) -> f64 {
        if self.shared.is_empty() {
            return f64::INFINITY;
        }
        let mut gap = alpha * self.p_only + (1.0 - alpha) * self.q_only;
        for c in &self.shared {
            gap += skew_gap(alpha, c.p, c.q, c.log_ratio);
        }
        if gap < 0.5 {
            return -(-gap).ln_1p();
        }
        let mut max = f64::NEG_INFINITY;
        for c in &self.shared {
            max = max.max(alpha * c.log_p + (1.0 - alpha) * c.log_q);
        }
        let sum: f64 = self
            .shared
            .iter()
            .map(|c| (alpha * c.log_p + (1.0 - alpha) * c.log_q - max).exp())
            .sum();
        -(max + sum.ln())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    Ok(())
}

/// `C_alpha(p, q) = -ln sum p^alpha q^(1 - alpha)`, zero-padding the smaller
/// grid.
pub fn c_alpha<P: MassFunction>(p: &P, q: &P, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(AlignedPair::new(p, q).c_alpha(alpha))
}

/// Bhattacharyya information, `C_(1/2)`. Symmetric in its arguments.
pub fn bhattacharyya<P: MassFunction>(p: &P, q: &P) -> f64 {
    AlignedPair::new(p, q).c_alpha(0.5)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of a concave function on `[0, 1]`.
fn maximize_concave(f: impl Fn(f64) -> f64, tol: f64) -> (f64, f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [0.0, 0.5, 1.0] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    (best.0, best.1, hi - lo)
}

/// Chernoff information `max_alpha C_alpha(p, q)`.
pub fn chernoff<P: MassFunction>(p: &P, q: &P, alpha_tol: f64) -> Result<RateResult> {
    if !(alpha_tol > 0.0 && alpha_tol < 1.0) {
        return domain(format!("alpha_tol must lie in (0, 1), got {alpha_tol}"));
    }
    let pair = AlignedPair::new(p, q);
    if pair.shared.is_empty() {
        return Ok(RateResult::infinite());
    }
    let (alpha_star, rate, width) = maximize_concave(|a| pair.c_alpha(a), alpha_tol);
    Ok(RateResult::finite(rate.max(0.0), alpha_star, width))
}

/// `C_alpha` between Poisson laws of means `lambda0` and `lambda1`:
/// `alpha l0 + (1 - alpha) l1 - l0^alpha l1^(1 - alpha)`.
pub fn poisson_c_alpha_closed(lambda0: f64, lambda1: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_poisson_means(lambda0, lambda1)?;
    Ok(match (lambda0 > 0.0, lambda1 > 0.0) {
        (true, true) => skew_gap(alpha, lambda0, lambda1, ((lambda0 - lambda1) / lambda1).ln_1p()),
        (false, true) if alpha == 0.0 => lambda1,
        (false, true) => (1.0 - alpha) * lambda1,
        (true, false) if alpha == 1.0 => lambda0,
        (true, false) => alpha * lambda0,
        (false, false) => 0.0,
    })
}

fn check_poisson_means(lambda0: f64, lambda1: f64) -> Result<()> {
    for l in [lambda0, lambda1] {
        if !l.is_finite() || l < 0.0 {
            return domain(format!("Poisson means must be finite and >= 0, got {l}"));
        }
    }
    Ok(())
}

/// Exact Chernoff information between two Poisson laws, from the stationary
/// point `alpha* = ln((l1 - l0) / (l1 ln(l1 / l0))) / ln(l0 / l1)`.
///
/// A zero mean is a point mass at 0, which overlaps the other law, so the
/// optimum sits on the boundary with the finite value of the other mean.
pub fn poisson_chernoff_closed(lambda0: f64, lambda1: f64) -> Result<RateResult> {
    check_poisson_means(lambda0, lambda1)?;
    if lambda0 == lambda1 {
        return Ok(RateResult::finite(0.0, 0.5, 0.0));
    }
    if lambda0 == 0.0 {
        return Ok(RateResult::finite(lambda1, 0.0, 0.0));
    }
    if lambda1 == 0.0 {
        return Ok(RateResult::finite(lambda0, 1.0, 0.0));
    }
    // u = ln(l1 / l0); alpha* = ln((1 - e^-u) / u) / (-u)
    let u = ((lambda1 - lambda0) / lambda0).ln_1p();
    let alpha_star = ((-(-u).exp_m1() / u).ln() / -u).clamp(0.0, 1.0);
    let rate = skew_gap(alpha_star, lambda0, lambda1, -u);
    Ok(RateResult::finite(rate, alpha_star, 0.0))
}

/// Multi-hypothesis exponent: the Chernoff information of the closest pair.
pub fn min_pair_rate<P: MassFunction>(hypotheses: &[P], alpha_tol: f64) -> Result<RateResult> {
    if hypotheses.len() < 2 {
        return domain(format!("need at least 2 hypotheses, got {}", hypotheses.len()));
    }
    let mut best: Option<RateResult> = None;
    for i in 0..hypotheses.len() {
        for j in i + 1..hypotheses.len() {
            let r = chernoff(&hypotheses[i], &hypotheses[j], alpha_tol)?;
            if best.is_none_or(|b| r.rate < b.rate) {
                best = Some(r);
            }
        }
    }
    Ok(best.expect("at least one pair"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{poisson_pair, poisson_pmf, thin, DEFAULT_EPS_TAIL};
    use proptest::prelude::*;

    fn pois(mean: f64) -> Pmf1D {
        poisson_pmf(mean, DEFAULT_EPS_TAIL).unwrap()
    }

    fn normalized(weights: Vec<f64>) -> Pmf1D {
        let total: f64 = weights.iter().sum();
        Pmf1D::from_parts(weights.iter().map(|w| w / total).collect(), 0.0).unwrap()
    }

    // Dense alpha grid, independent of the golden-section search.
    fn grid_max<P: MassFunction>(p: &P, q: &P) -> f64 {
        (0..=2000)
            .map(|i| c_alpha(p, q, i as f64 / 2000.0).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gap_kernel_series_and_closed_branches_agree() {
        // Around |r| = 1 both branches are accurate.
        for alpha in [0.1, 0.5, 0.8] {
            let r = -1.0f64;
            let closed = alpha * r.exp_m1() - (alpha * r).exp_m1();
            assert!((gap_kernel(alpha, r) - closed).abs() < 1e-15);
        }
        // alpha = 1/2 has the cancellation-free form (e^(r/2) - 1)^2 / 2.
        for r in [-1e-9, -1e-5, -0.3, -4.0] {
            let exact = 0.5 * (r / 2.0f64).exp_m1().powi(2);
            let got = gap_kernel(0.5, r);
            assert!((got - exact).abs() <= 1e-14 * exact, "r={r}");
        }
    }

    #[test]
    fn identical_distributions_have_zero_divergence() {
        let p = pois(7.3);
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(c_alpha(&p, &p, alpha).unwrap(), 0.0);
        }
        assert_eq!(bhattacharyya(&p, &p), 0.0);
        assert_eq!(chernoff(&p, &p, DEFAULT_ALPHA_TOL).unwrap().rate, 0.0);
    }

    #[test]
    fn endpoint_conventions() {
        // C_0 = -ln q(supp p), which vanishes when supp q is inside supp p.
        let wide = pois(3.0);
        let narrow = Pmf1D::from_parts(vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(c_alpha(&wide, &narrow, 0.0).unwrap(), 0.0);
        let c0 = c_alpha(&narrow, &wide, 0.0).unwrap();
        let expected = -(wide.get(0) + wide.get(1)).ln();
        assert!((c0 - expected).abs() < 1e-12);
    }

    #[test]
    fn alpha_out_of_range() {
        let p = pois(1.0);
        assert!(c_alpha(&p, &p, -0.1).is_err());
        assert!(c_alpha(&p, &p, 1.1).is_err());
        assert!(c_alpha(&p, &p, f64::NAN).is_err());
        assert!(chernoff(&p, &p, 0.0).is_err());
    }

    #[test]
    fn poisson_bhattacharyya_closed_form() {
        // 1/2 (sqrt(10.2) - sqrt(10))^2, evaluated at 50 digits.
        let expected = 4.950_616_379_220_431e-4;
        // The numeric value misses only the gap inside the 1e-12 tails.
        let got = bhattacharyya(&pois(10.0), &pois(10.2));
        assert!((got - expected).abs() < 1e-9 * expected);
        assert!((c_alpha(&pois(10.0), &pois(10.2), 0.5).unwrap() - expected).abs() < 1e-15);
        assert_eq!(bhattacharyya(&pois(10.0), &pois(10.2)), bhattacharyya(&pois(10.2), &pois(10.0)));
    }

    #[test]
    fn poisson_chernoff_stationary_point() {
        // 50-digit evaluation of the stationary-point formula.
        let rate = 7.695_471_085_280_816e-3;
        let alpha = 0.496_793_448_215_695_26;
        let closed = poisson_chernoff_closed(10.0, 10.8).unwrap();
        assert!((closed.rate - rate).abs() < 1e-14 * rate.max(1.0));
        assert!((closed.alpha_star - alpha).abs() < 1e-12);
        let numeric = chernoff(&pois(10.0), &pois(10.8), DEFAULT_ALPHA_TOL).unwrap();
        assert!((numeric.rate - rate).abs() < 1e-10 * rate);
        assert!((numeric.alpha_star - alpha).abs() < 1e-4);
    }

    #[test]
    fn poisson_closed_edge_cases() {
        assert_eq!(poisson_chernoff_closed(10.0, 10.0).unwrap().rate, 0.0);
        let r = poisson_chernoff_closed(0.0, 2.0).unwrap();
        assert_eq!((r.rate, r.alpha_star), (2.0, 0.0));
        assert!(poisson_chernoff_closed(-1.0, 2.0).is_err());
        // Numerical path agrees: delta_0 against Poisson(2).
        let n = chernoff(&Pmf1D::delta(0), &pois(2.0), DEFAULT_ALPHA_TOL).unwrap();
        assert!((n.rate - 2.0).abs() < 1e-9);
        // Half-alpha identity.
        for (l0, l1) in [(1.0, 3.0), (100.0, 100.001), (0.01, 0.02)] {
            let half = poisson_c_alpha_closed(l0, l1, 0.5).unwrap();
            let identity = 0.5 * (l1 - l0) * (l1 - l0) / (l1.sqrt() + l0.sqrt()).powi(2);
            assert!((half - identity).abs() < 1e-13 * identity);
        }
    }

    #[test]
    fn disjoint_supports_are_flagged() {
        let p = Pmf1D::delta(0);
        let q = Pmf1D::delta(3);
        let r = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap();
        assert!(r.disjoint && r.rate.is_infinite());
        assert!(bhattacharyya(&p, &q).is_infinite());
    }

    #[test]
    fn closest_pair_rule() {
        let hyps = vec![pois(10.0), pois(10.2), pois(12.0)];
        let got = min_pair_rate(&hyps, DEFAULT_ALPHA_TOL).unwrap();
        let mut pairwise = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                pairwise.push(chernoff(&hyps[i], &hyps[j], DEFAULT_ALPHA_TOL).unwrap().rate);
            }
        }
        let oracle = pairwise.into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(got.rate, oracle);
        let direct = chernoff(&pois(10.0), &pois(10.2), DEFAULT_ALPHA_TOL).unwrap().rate;
        assert_eq!(got.rate, direct);

        let same = vec![pois(3.0), pois(3.0)];
        assert_eq!(min_pair_rate(&same, DEFAULT_ALPHA_TOL).unwrap().rate, 0.0);
        assert!(min_pair_rate(&hyps[..1], DEFAULT_ALPHA_TOL).is_err());
    }

    #[test]
    fn works_on_joint_pmfs() {
        let (p, q) = poisson_pair(1.0, 1.5, DEFAULT_EPS_TAIL).unwrap();
        let a = Pmf2D::product(&p, &pois(2.0));
        let b = Pmf2D::product(&q, &pois(2.0));
        // Independent products with a shared factor reduce to the 1D value.
        let joint = bhattacharyya(&a, &b);
        let marginal = bhattacharyya(&p, &q);
        // Equal up to how the ~1e-12 tails are pooled.
        assert!((joint - marginal).abs() < 1e-12);
    }

    fn pmf_strategy() -> impl Strategy<Value = Pmf1D> {
        prop::collection::vec(1e-3f64..1.0, 2..12).prop_map(normalized)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn chernoff_dominates_bhattacharyya_and_grid(p in pmf_strategy(), q in pmf_strategy()) {
            let r = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap();
            prop_assert!(r.rate >= bhattacharyya(&p, &q) - 1e-12);
            prop_assert!(r.rate >= grid_max(&p, &q) - 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.alpha_star));
        }

        #[test]
        fn skew_symmetry(p in pmf_strategy(), q in pmf_strategy()) {
            for i in 0..=10 {
                let a = i as f64 / 10.0;
                let lhs = c_alpha(&p, &q, a).unwrap();
                let rhs = c_alpha(&q, &p, 1.0 - a).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
            prop_assert_eq!(bhattacharyya(&p, &q), bhattacharyya(&q, &p));
        }

        #[test]
        fn concave_in_alpha(p in pmf_strategy(), q in pmf_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let mid = c_alpha(&p, &q, 0.5 * (a + b)).unwrap();
            let chord = 0.5 * (c_alpha(&p, &q, a).unwrap() + c_alpha(&p, &q, b).unwrap());
            prop_assert!(mid >= chord - 1e-12);
        }

        #[test]
        fn data_processing(p in pmf_strategy(), q in pmf_strategy()) {
            let full = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap().rate;
            for tau in [0.1, 0.5, 0.9] {
                let lossy = chernoff(&thin(&p, tau).unwrap(), &thin(&q, tau).unwrap(), DEFAULT_ALPHA_TOL).unwrap().rate;
                prop_assert!(lossy <= full + 1e-10);
            }
        }

        #[test]
        fn zero_rate_iff_equal(p in pmf_strategy(), q in pmf_strategy()) {
            let rate = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap().rate;
            let equal = p.max_abs_diff(&q) < 1e-10;
            prop_assert_eq!(rate == 0.0 || rate < 1e-20, equal);
        }

        #[test]
        fn poisson_numeric_matches_closed(l0 in 0.01f64..100.0, ratio in 0.5f64..2.0) {
            let l1 = l0 * ratio;
            let closed = poisson_chernoff_closed(l0, l1).unwrap().rate;
            let (p, q) = poisson_pair(l0, l1, DEFAULT_EPS_TAIL).unwrap();
            let numeric = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap().rate;
            prop_assert!((numeric - closed).abs() <= 1e-8 * closed.max(1e-300));
        }
    }
}
