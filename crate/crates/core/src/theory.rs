//! Exact checks of the longer-text detectability bounds on small i.i.d.
//! token models.
//!
//! A longer human text is `N = n*k` tokens drawn i.i.d. from `h`. A longer
//! machine text with human ratio `alpha` draws its first `(1-alpha)N` tokens
//! from `m` and the remaining `alpha*N` from `h`. Everything here enumerates
//! all `|alphabet|^N` sequences, so it is exact up to floating point and is
//! limited by [`ENUMERATION_BUDGET`].

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::corpus::{check_pmf, SyntheticDist};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

pub const ENUMERATION_BUDGET: u64 = 10_000_000;
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// `1/2 * sum |h - m|`
pub fn tv_exact(h: &[f64], m: &[f64]) -> Result<f64> {
    if h.len() != m.len() {
        return Err(Error::Input(format!(
            "distribution lengths differ: {} vs {}",
            h.len(),
            m.len()
        )));
    }
    check_pmf("first", h)?;
    check_pmf("second", m)?;
    Ok(0.5 * h.iter().zip(m).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Number of machine positions `(1 - alpha) * n * k`; errors unless
/// `alpha * n * k` is integral.
pub fn machine_positions(n: usize, k: usize, alpha: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Input(format!("alpha must lie in [0,1], got {alpha}")));
    }
    let total = (n * k) as f64;
    let human = alpha * total;
    if (human - human.round()).abs() > 1e-9 {
        return Err(Error::Input(format!("alpha * n * k = {human} is not integral")));
    }
    Ok(n * k - human.round() as usize)
}

fn check_budget(alphabet: usize, positions: usize) -> Result<()> {
    let outcomes = (alphabet as f64).powi(positions as i32);
    if outcomes > ENUMERATION_BUDGET as f64 {
        return Err(Error::Size {
            outcomes,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Visits every sequence once with its probability under the machine
/// product `P` (machine positions flagged in `mask`) and the human product
/// `Q`. `symbols` holds the current sequence.
fn enumerate(dist: &SyntheticDist, mask: &[bool], mut visit: impl FnMut(&[usize], f64, f64)) {
    fn walk(
        dist: &SyntheticDist,
        mask: &[bool],
        symbols: &mut Vec<usize>,
        p: f64,
        q: f64,
        visit: &mut dyn FnMut(&[usize], f64, f64),
    ) {
        let depth = symbols.len();
        if depth == mask.len() {
            visit(symbols, p, q);
            return;
        }
        for s in 0..dist.alphabet_size() {
            let hs = dist.human()[s];
            let ps = if mask[depth] { dist.machine()[s] } else { hs };
            // outcomes impossible under both products carry no mass
            if p * ps == 0.0 && q * hs == 0.0 {
                continue;
            }
            symbols.push(s);
            walk(dist, mask, symbols, p * ps, q * hs, visit);
            symbols.pop();
        }
    }
    let mut symbols = Vec::with_capacity(mask.len());
    walk(dist, mask, &mut symbols, 1.0, 1.0, &mut visit);
}

fn suffix_mask(n: usize, k: usize, alpha: f64) -> Result<Vec<bool>> {
    let machine = machine_positions(n, k, alpha)?;
    Ok((0..n * k).map(|i| i < machine).collect())
}

/// TV between the longer machine and longer human product distributions
/// for an arbitrary set of machine positions.
pub fn tv_product_with_mask(dist: &SyntheticDist, mask: &[bool]) -> Result<f64> {
    check_budget(dist.alphabet_size(), mask.len())?;
    let mut total = 0.0;
    enumerate(dist, mask, |_, p, q| total += (p - q).abs());
    Ok(0.5 * total)
}

/// Exact TV with the human block placed as a suffix.
pub fn tv_product_bruteforce(dist: &SyntheticDist, n: usize, k: usize, alpha: f64) -> Result<f64> {
    let mask = suffix_mask(n, k, alpha)?;
    tv_product_with_mask(dist, &mask)
}

/// Lower and upper bounds on the longer-text TV:
/// `1 - 2 exp(-N (1-alpha)^2 delta^2 / 2)` and `1 - (1-delta)^(N (1-alpha))`.
pub fn theorem1_bounds(delta: f64, n: usize, k: usize, alpha: f64) -> (f64, f64) {
    let nk = (n * k) as f64;
    let lower = 1.0 - 2.0 * (-nk * (1.0 - alpha).powi(2) * delta * delta / 2.0).exp();
    let upper = 1.0 - (1.0 - delta).powf(nk * (1.0 - alpha));
    (lower, upper)
}

/// `1 - 1/2 (1-delta)^(2 N (1-alpha))`
pub fn theorem2_bound(delta: f64, n: usize, k: usize, alpha: f64) -> f64 {
    1.0 - 0.5 * (1.0 - delta).powf(2.0 * (n * k) as f64 * (1.0 - alpha))
}

/// AUROC of the likelihood-ratio detector (score `P/Q`) separating longer
/// machine from longer human texts, with half credit for ties.
pub fn optimal_auroc_bruteforce(dist: &SyntheticDist, n: usize, k: usize, alpha: f64) -> Result<f64> {
    let mask = suffix_mask(n, k, alpha)?;
    check_budget(dist.alphabet_size(), mask.len())?;
    let a = dist.alphabet_size();
    let n_machine = mask.iter().filter(|&&b| b).count();

    // The likelihood ratio only depends on the symbol counts inside the
    // machine block, so outcomes are grouped by those counts.
    let mut groups: HashMap<Vec<u32>, (f64, f64)> = HashMap::new();
    enumerate(dist, &mask, |symbols, p, q| {
        let mut key = vec![0u32; a];
        for &s in &symbols[..n_machine] {
            key[s] += 1;
        }
        let e = groups.entry(key).or_insert((0.0, 0.0));
        e.0 += p;
        e.1 += q;
    });

    let log_ratio: Vec<f64> = (0..a)
        .map(|s| {
            let (m, h) = (dist.machine()[s], dist.human()[s]);
            if m == 0.0 {
                f64::NEG_INFINITY
            } else if h == 0.0 {
                f64::INFINITY
            } else {
                m.ln() - h.ln()
            }
        })
        .collect();
    let mut scored: Vec<(f64, f64, f64)> = groups
        .into_iter()
        .map(|(counts, (p, q))| {
            let mut score = 0.0;
            for (s, &c) in counts.iter().enumerate() {
                if c > 0 {
                    score += f64::from(c) * log_ratio[s];
                }
            }
            (score, p, q)
        })
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));

    let same = |x: f64, y: f64| {
        x == y || (x.is_finite() && y.is_finite() && (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
    };
    let mut auroc = 0.0;
    let mut q_below = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let (mut p_tie, mut q_tie) = (scored[i].1, scored[i].2);
        let mut j = i + 1;
        while j < scored.len() && same(scored[j].0, scored[i].0) {
            p_tie += scored[j].1;
            q_tie += scored[j].2;
            j += 1;
        }
        auroc += p_tie * (q_below + 0.5 * q_tie);
        q_below += q_tie;
        i = j;
    }
    Ok(auroc)
}

/// `TV(delta_0, m)`, which must equal `1 - m(0)`.
pub fn dirac_collapse_check(m: &[f64]) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Input("empty distribution".into()));
    }
    let mut point = vec![0.0; m.len()];
    point[0] = 1.0;
    let tv = tv_exact(&point, m)?;
    if (tv - (1.0 - m[0])).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "TV(delta_0, m) = {tv} but 1 - m(0) = {}",
            1.0 - m[0]
        )));
    }
    Ok(tv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo TV for cells beyond the enumeration budget:
/// `TV = E_P[max(0, 1 - Q(x)/P(x))]`.
pub fn tv_monte_carlo(
    dist: &SyntheticDist,
    n: usize,
    k: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let mask = suffix_mask(n, k, alpha)?;
    let human = WeightedIndex::new(dist.human()).map_err(|e| Error::Validation(e.to_string()))?;
    let machine = WeightedIndex::new(dist.machine()).map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = rng::stream(seed, streams::MONTE_CARLO);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        // log Q/P summed over the machine block; the human block cancels
        let mut log_ratio = 0.0;
        for &is_machine in &mask {
            if is_machine {
                let s = machine.sample(&mut rng);
                log_ratio += dist.human()[s].ln() - dist.machine()[s].ln();
            } else {
                human.sample(&mut rng);
            }
        }
        let v = (1.0 - log_ratio.exp()).max(0.0);
        sum += v;
        sum_sq += v * v;
    }
    let n_s = samples as f64;
    let mean = sum / n_s;
    let var = ((sum_sq / n_s - mean * mean) * n_s / (n_s - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n_s).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub human: Vec<f64>,
    pub machine: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

impl Cell {
    pub fn bernoulli(delta: f64, n: usize, k: usize, alpha: f64) -> Result<Self> {
        let d = SyntheticDist::bernoulli(delta)?;
        Ok(Cell {
            human: d.human().to_vec(),
            machine: d.machine().to_vec(),
            n,
            k,
            alpha,
        })
    }

    pub fn dist(&self) -> Result<SyntheticDist> {
        SyntheticDist::new(self.human.clone(), self.machine.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub alphabet_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub params: CellParams,
    pub tv_exact: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn evaluate(cell: &Cell) -> Result<Self> {
        let dist = cell.dist()?;
        let delta = tv_exact(dist.human(), dist.machine())?;
        let tv = tv_product_bruteforce(&dist, cell.n, cell.k, cell.alpha)?;
        let (lower, upper) = theorem1_bounds(delta, cell.n, cell.k, cell.alpha);
        Ok(BoundCheck {
            params: cell_params(cell, delta),
            tv_exact: tv,
            lower_bound: lower,
            upper_bound: upper,
            holds: lower - BOUND_TOLERANCE <= tv && tv <= upper + BOUND_TOLERANCE,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AurocCheck {
    pub params: CellParams,
    pub auroc_optimal: f64,
    pub bound: f64,
    pub holds: bool,
}

impl AurocCheck {
    pub fn evaluate(cell: &Cell) -> Result<Self> {
        let dist = cell.dist()?;
        let delta = tv_exact(dist.human(), dist.machine())?;
        let auroc = optimal_auroc_bruteforce(&dist, cell.n, cell.k, cell.alpha)?;
        let bound = theorem2_bound(delta, cell.n, cell.k, cell.alpha);
        Ok(AurocCheck {
            params: cell_params(cell, delta),
            auroc_optimal: auroc,
            bound,
            holds: auroc <= bound + BOUND_TOLERANCE,
        })
    }
}

fn cell_params(cell: &Cell, delta: f64) -> CellParams {
    CellParams {
        delta,
        n: cell.n,
        k: cell.k,
        alpha: cell.alpha,
        alphabet_size: cell.human.len(),
    }
}

/// One row of the suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub params: CellParams,
    pub tv: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_vacuous: bool,
    pub auroc: f64,
    pub auroc_bound: f64,
    /// `TV(delta_0, m)` for the cell's machine distribution.
    pub dirac_tv: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub cell: Cell,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub cells_evaluated: usize,
    pub cells_skipped: usize,
    pub violations: Vec<String>,
    pub monotone_in_k: bool,
    pub antitone_in_alpha: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cells: Vec<CellReport>,
    pub skipped: Vec<SkippedCell>,
    pub summary: SuiteSummary,
}

/// Bernoulli pairs with the given TVs over every `(n, k, alpha)`; `alpha`
/// values that do not make `alpha * n * k` integral are left out.
pub fn bernoulli_grid(deltas: &[f64], ns: &[usize], ks: &[usize], alphas: &[f64]) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &delta in deltas {
        for &n in ns {
            for &k in ks {
                for &alpha in alphas {
                    if machine_positions(n, k, alpha).is_ok() {
                        cells.push(Cell::bernoulli(delta, n, k, alpha)?);
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub fn default_grid() -> Vec<Cell> {
    bernoulli_grid(&[0.1, 0.2, 0.4], &[1, 2], &[1, 2, 3], &[0.0, 0.5]).expect("default grid is valid")
}

pub fn run_theorem_suite(cells: &[Cell]) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    let mut violations = Vec::new();
    for cell in cells {
        let bound = match BoundCheck::evaluate(cell) {
            Ok(b) => b,
            Err(Error::Size { outcomes, budget }) => {
                skipped.push(SkippedCell {
                    cell: cell.clone(),
                    reason: format!("{outcomes} outcomes exceed budget {budget}"),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let roc = AurocCheck::evaluate(cell)?;
        let dirac_tv = dirac_collapse_check(&cell.machine)?;
        let p = &bound.params;
        if !bound.holds {
            violations.push(format!(
                "TV bound violated at delta={} n={} k={} alpha={}: {} not in [{}, {}]",
                p.delta, p.n, p.k, p.alpha, bound.tv_exact, bound.lower_bound, bound.upper_bound
            ));
        }
        if !roc.holds {
            violations.push(format!(
                "AUROC bound violated at delta={} n={} k={} alpha={}: {} > {}",
                p.delta, p.n, p.k, p.alpha, roc.auroc_optimal, roc.bound
            ));
        }
        evaluated.push(cell);
        rows.push(CellReport {
            lower_vacuous: bound.lower_bound <= 0.0,
            params: bound.params,
            tv: bound.tv_exact,
            lower: bound.lower_bound,
            upper: bound.upper_bound,
            auroc: roc.auroc_optimal,
            auroc_bound: roc.bound,
            dirac_tv,
            holds: bound.holds && roc.holds,
        });
    }

    let (monotone_in_k, mut order_violations) = check_order(&evaluated, &rows);
    violations.append(&mut order_violations);
    let antitone_in_alpha = !violations.iter().any(|v| v.starts_with("alpha order"));
    let summary = SuiteSummary {
        cells_evaluated: rows.len(),
        cells_skipped: skipped.len(),
        passed: violations.is_empty(),
        violations,
        monotone_in_k,
        antitone_in_alpha,
    };
    Ok(SuiteReport {
        cells: rows,
        skipped,
        summary,
    })
}

/// TV must not decrease with `k` (fixed distribution, `n`, `alpha`) nor
/// increase with `alpha` (fixed distribution, `n`, `k`).
fn check_order(cells: &[&Cell], rows: &[CellReport]) -> (bool, Vec<String>) {
    let evaluated: Vec<(&Cell, &CellReport)> = cells.iter().copied().zip(rows).collect();
    let mut violations = Vec::new();
    let mut k_ok = true;
    for (a, ra) in &evaluated {
        for (b, rb) in &evaluated {
            if a.human != b.human || a.machine != b.machine || a.n != b.n {
                continue;
            }
            if a.alpha == b.alpha && a.k < b.k && rb.tv < ra.tv - 1e-12 {
                k_ok = false;
                violations.push(format!(
                    "k order: tv(k={}) = {} < tv(k={}) = {} at n={} alpha={}",
                    b.k, rb.tv, a.k, ra.tv, a.n, a.alpha
                ));
            }
            if a.k == b.k && a.alpha < b.alpha && rb.tv > ra.tv + 1e-12 {
                violations.push(format!(
                    "alpha order: tv(alpha={}) = {} > tv(alpha={}) = {} at n={} k={}",
                    b.alpha, rb.tv, a.alpha, ra.tv, a.n, a.k
                ));
            }
        }
    }
    (k_ok, violations)
}
