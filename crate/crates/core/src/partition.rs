//! Sub-surface phase construction and passive beamforming gains.
//!
//! A partition splits the RIS into `S` contiguous blocks of columns (along
//! y). Sub-surface `s` carries a linear phase gradient matched to one
//! Tx-RIS / RIS-Rx path pair plus a common phase `psi_s`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::{CVector, PathSet, RisGeometry};
use crate::error::{Error, Result};

/// Tolerance for treating a gradient mismatch as exact alignment.
pub const ALIGNMENT_TOL: f64 = 1e-12;

/// Linear phase slope of a sub-surface, in direction-cosine units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGradient {
    pub g_x: f64,
    pub g_y: f64,
}

impl PhaseGradient {
    pub fn new(g_x: f64, g_y: f64) -> Self {
        Self { g_x, g_y }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    /// `self - other` componentwise.
    pub fn mismatch(&self, other: &PhaseGradient) -> (f64, f64) {
        (self.g_x - other.g_x, self.g_y - other.g_y)
    }

    pub fn is_aligned_with(&self, other: &PhaseGradient) -> bool {
        let (ex, ey) = self.mismatch(other);
        ex.abs() <= ALIGNMENT_TOL && ey.abs() <= ALIGNMENT_TOL
    }
}

/// Binary `L1 x L2` matrix pairing Tx-RIS paths (rows) with RIS-Rx paths (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingMatrix {
    l1: usize,
    l2: usize,
    entries: Vec<bool>,
}

impl PairingMatrix {
    /// Builds from row-major 0/1 entries; every row and column may hold at most one 1.
    pub fn new(l1: usize, l2: usize, entries: &[u8]) -> Result<Self> {
        if entries.len() != l1 * l2 {
            return Err(Error::Pairing(format!(
                "expected {} entries for a {l1}x{l2} matrix, got {}",
                l1 * l2,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&e| e > 1) {
            return Err(Error::Pairing(format!("entry {bad} is not binary")));
        }
        let entries: Vec<bool> = entries.iter().map(|&e| e == 1).collect();
        let m = Self { l1, l2, entries };
        m.check()?;
        Ok(m)
    }

    /// Builds from a list of `(u, v)` pairs (0-based).
    pub fn from_pairs(l1: usize, l2: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut entries = vec![false; l1 * l2];
        for &(u, v) in pairs {
            if u >= l1 || v >= l2 {
                return Err(Error::Pairing(format!("pair ({u}, {v}) outside {l1}x{l2}")));
            }
            if entries[u * l2 + v] {
                return Err(Error::Pairing(format!("pair ({u}, {v}) repeated")));
            }
            entries[u * l2 + v] = true;
        }
        let m = Self { l1, l2, entries };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        for u in 0..self.l1 {
            let row = (0..self.l2).filter(|&v| self.get(u, v)).count();
            if row > 1 {
                return Err(Error::Pairing(format!("row {u} has {row} ones")));
            }
        }
        for v in 0..self.l2 {
            let col = (0..self.l1).filter(|&u| self.get(u, v)).count();
            if col > 1 {
                return Err(Error::Pairing(format!("column {v} has {col} ones")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.l1
    }

    pub fn cols(&self) -> usize {
        self.l2
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.entries[u * self.l2 + v]
    }

    /// Number of paired paths.
    pub fn count(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Paired `(u, v)` indices in row order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.l1)
            .flat_map(|u| (0..self.l2).filter(move |&v| self.get(u, v)).map(move |v| (u, v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut entries = vec![false; self.l1 * self.l2];
        for u in 0..self.l1 {
            for v in 0..self.l2 {
                entries[v * self.l1 + u] = self.get(u, v);
            }
        }
        Self {
            l1: self.l2,
            l2: self.l1,
            entries,
        }
    }
}

/// All `L1 * L2` candidate gradients, indexed by `u * L2 + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleGradients {
    l1: usize,
    l2: usize,
    gradients: Vec<PhaseGradient>,
    duplicates: Vec<((usize, usize), (usize, usize))>,
}

impl FeasibleGradients {
    pub fn get(&self, u: usize, v: usize) -> PhaseGradient {
        self.gradients[u * self.l2 + v]
    }

    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }

    /// Pairs of distinct `(u, v)` indices whose gradients coincide.
    pub fn duplicates(&self) -> &[((usize, usize), (usize, usize))] {
        &self.duplicates
    }

    /// Number of distinct gradients.
    pub fn distinct_count(&self) -> usize {
        let mut dup = vec![false; self.gradients.len()];
        for &(_, (u, v)) in &self.duplicates {
            dup[u * self.l2 + v] = true;
        }
        dup.iter().filter(|d| !**d).count()
    }
}

/// Gradient `(zeta_x, zeta_y)` for every pair of a Tx-RIS arrival `u` and a
/// RIS-Rx departure `v`: departure cosines minus arrival cosines.
pub fn feasible_gradients(tx_paths: &PathSet, rx_paths: &PathSet) -> Result<FeasibleGradients> {
    if tx_paths.is_empty() || rx_paths.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    let arrivals: Vec<(f64, f64)> = tx_paths
        .arrivals()
        .iter()
        .map(|d| {
            d.cosines()
                .ok_or_else(|| Error::Dimension("Tx-RIS arrivals must be planar".into()))
        })
        .collect::<Result<_>>()?;
    let departures: Vec<(f64, f64)> = rx_paths
        .departures()
        .iter()
        .map(|d| {
            d.cosines()
                .ok_or_else(|| Error::Dimension("RIS-Rx departures must be planar".into()))
        })
        .collect::<Result<_>>()?;
    let (l1, l2) = (arrivals.len(), departures.len());
    let mut gradients = Vec::with_capacity(l1 * l2);
    for &(ax, ay) in &arrivals {
        for &(dx, dy) in &departures {
            gradients.push(PhaseGradient::new(dx - ax, dy - ay));
        }
    }
    let mut duplicates = Vec::new();
    for j in 0..gradients.len() {
        if let Some(i) = (0..j).find(|&i| gradients[i] == gradients[j]) {
            duplicates.push(((i / l2, i % l2), (j / l2, j % l2)));
        }
    }
    Ok(FeasibleGradients {
        l1,
        l2,
        gradients,
        duplicates,
    })
}

/// Assignment of RIS columns, gradients and common phases to sub-surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    t: Vec<f64>,
    column_counts: Option<Vec<usize>>,
    gradients: Vec<PhaseGradient>,
    pairs: Vec<(usize, usize)>,
    common_phases: Vec<f64>,
    pairing: PairingMatrix,
}

fn wrap_phase(psi: f64) -> f64 {
    let w = psi.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

impl PartitionPlan {
    /// Plan with fractional sizes `t` (summing to 1) and no column realization.
    ///
    /// `pairs[s]` is the `(u, v)` pair whose gradient sub-surface `s` uses;
    /// `(l1, l2)` sizes the pairing matrix. Common phases are wrapped into `[0, 2pi)`.
    pub fn new(
        t: Vec<f64>,
        gradients: Vec<PhaseGradient>,
        pairs: Vec<(usize, usize)>,
        common_phases: Vec<f64>,
        l1: usize,
        l2: usize,
    ) -> Result<Self> {
        let s = t.len();
        if s == 0 {
            return Err(Error::Partition("plan needs at least one sub-surface".into()));
        }
        if gradients.len() != s || pairs.len() != s || common_phases.len() != s {
            return Err(Error::Partition(format!(
                "{s} sizes, {} gradients, {} pairs, {} phases",
                gradients.len(),
                pairs.len(),
                common_phases.len()
            )));
        }
        if t.iter().any(|&x| !(0.0..=1.0 + 1e-12).contains(&x)) {
            return Err(Error::Partition(format!("sizes outside [0, 1]: {t:?}")));
        }
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Partition(format!("sizes sum to {sum}, expected 1")));
        }
        let pairing = PairingMatrix::from_pairs(l1, l2, &pairs)?;
        Ok(Self {
            t,
            column_counts: None,
            gradients,
            pairs,
            common_phases: common_phases.into_iter().map(wrap_phase).collect(),
            pairing,
        })
    }

    /// Plan whose gradients come from `feasible` at the given pairs.
    pub fn from_pairs(
        t: Vec<f64>,
        feasible: &FeasibleGradients,
        pairs: Vec<(usize, usize)>,
        common_phases: Vec<f64>,
    ) -> Result<Self> {
        let gradients = pairs
            .iter()
            .map(|&(u, v)| {
                if u < feasible.l1() && v < feasible.l2() {
                    Ok(feasible.get(u, v))
                } else {
                    Err(Error::Partition(format!("pair ({u}, {v}) outside the feasible set")))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(t, gradients, pairs, common_phases, feasible.l1(), feasible.l2())
    }

    /// Plan realized on integer column counts; `t_s = counts_s / sum(counts)`.
    pub fn with_columns(
        column_counts: Vec<usize>,
        gradients: Vec<PhaseGradient>,
        pairs: Vec<(usize, usize)>,
        common_phases: Vec<f64>,
        l1: usize,
        l2: usize,
    ) -> Result<Self> {
        let ny: usize = column_counts.iter().sum();
        if ny == 0 {
            return Err(Error::Partition("column counts sum to zero".into()));
        }
        let t = column_counts.iter().map(|&c| c as f64 / ny as f64).collect();
        let mut plan = Self::new(t, gradients, pairs, common_phases, l1, l2)?;
        plan.column_counts = Some(column_counts);
        Ok(plan)
    }

    /// Rounds `t` onto `ny` columns, dropping sub-surfaces that end up empty.
    pub fn realize(&self, ny: usize) -> Result<(PartitionPlan, RoundedPartition)> {
        let rounded = round_partition(&self.t, ny)?;
        let keep: Vec<usize> = (0..self.len()).filter(|&s| rounded.counts[s] > 0).collect();
        let plan = PartitionPlan::with_columns(
            keep.iter().map(|&s| rounded.counts[s]).collect(),
            keep.iter().map(|&s| self.gradients[s]).collect(),
            keep.iter().map(|&s| self.pairs[s]).collect(),
            keep.iter().map(|&s| self.common_phases[s]).collect(),
            self.pairing.rows(),
            self.pairing.cols(),
        )?;
        Ok((plan, rounded))
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn column_counts(&self) -> Option<&[usize]> {
        self.column_counts.as_deref()
    }

    pub fn gradients(&self) -> &[PhaseGradient] {
        &self.gradients
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn common_phases(&self) -> &[f64] {
        &self.common_phases
    }

    pub fn pairing(&self) -> &PairingMatrix {
        &self.pairing
    }

    pub fn set_common_phase(&mut self, s: usize, psi: f64) {
        self.common_phases[s] = wrap_phase(psi);
    }

    pub fn set_common_phases(&mut self, psi: &[f64]) -> Result<()> {
        if psi.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} phases for {} sub-surfaces",
                psi.len(),
                self.len()
            )));
        }
        for (s, &p) in psi.iter().enumerate() {
            self.set_common_phase(s, p);
        }
        Ok(())
    }

    /// Prefix sums of the column counts, `[0, N1, N1+N2, ..., Ny]`.
    pub fn column_offsets(&self) -> Option<Vec<usize>> {
        self.column_counts.as_ref().map(|counts| {
            let mut acc = vec![0];
            for c in counts {
                acc.push(acc.last().unwrap() + c);
            }
            acc
        })
    }

    fn realized_counts(&self, ris: &RisGeometry) -> Result<&[usize]> {
        let counts = self
            .column_counts
            .as_deref()
            .ok_or_else(|| Error::Partition("plan has no column realization".into()))?;
        let total: usize = counts.iter().sum();
        if total != ris.ny() {
            return Err(Error::Partition(format!(
                "column counts sum to {total}, RIS has {} columns",
                ris.ny()
            )));
        }
        Ok(counts)
    }

    /// Flat text record: `S=..;t=..;cols=..;pairs=u:v,..;grad=gx:gy,..;psi=..;L=l1x l2`.
    pub fn to_record(&self) -> String {
        fn join<T: fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let cols = self.column_counts.as_deref().map(join).unwrap_or_else(|| "-".into());
        let pairs = self
            .pairs
            .iter()
            .map(|(u, v)| format!("{u}:{v}"))
            .collect::<Vec<_>>()
            .join(",");
        let grads = self
            .gradients
            .iter()
            .map(|g| format!("{}:{}", g.g_x, g.g_y))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "S={};L={}x{};t={};cols={};pairs={};grad={};psi={}",
            self.len(),
            self.pairing.rows(),
            self.pairing.cols(),
            join(&self.t),
            cols,
            pairs,
            grads,
            join(&self.common_phases)
        )
    }
}

impl fmt::Display for PartitionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

fn parse_err<E: fmt::Display>(field: &str) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Parse(format!("{field}: {e}"))
}

fn parse_list<T: FromStr>(field: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|x| x.trim().parse::<T>().map_err(parse_err(field)))
        .collect()
}

fn parse_colon_pair<T: FromStr>(field: &str, raw: &str) -> Result<(T, T)>
where
    T::Err: fmt::Display,
{
    let (a, b) = raw
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("{field}: expected a:b, got {raw}")))?;
    Ok((
        a.trim().parse().map_err(parse_err(field))?,
        b.trim().parse().map_err(parse_err(field))?,
    ))
}

impl FromStr for PartitionPlan {
    type Err = Error;

    fn from_str(record: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for part in record.trim().split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("field without '=': {part}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("missing field {k}")))
        };
        let s: usize = get("S")?.parse().map_err(parse_err("S"))?;
        let (l1, l2) = get("L")?
            .split_once('x')
            .ok_or_else(|| Error::Parse("L: expected l1xl2".into()))
            .and_then(|(a, b)| {
                Ok((
                    a.parse::<usize>().map_err(parse_err("L"))?,
                    b.parse::<usize>().map_err(parse_err("L"))?,
                ))
            })?;
        let t: Vec<f64> = parse_list("t", get("t")?)?;
        let pairs = get("pairs")?
            .split(',')
            .filter(|x| !x.is_empty())
            .map(|x| parse_colon_pair::<usize>("pairs", x))
            .collect::<Result<Vec<_>>>()?;
        let gradients = get("grad")?
            .split(',')
            .filter(|x| !x.is_empty())
            .map(|x| parse_colon_pair::<f64>("grad", x).map(|(a, b)| PhaseGradient::new(a, b)))
            .collect::<Result<Vec<_>>>()?;
        let psi: Vec<f64> = parse_list("psi", get("psi")?)?;
        if t.len() != s {
            return Err(Error::Parse(format!("S={s} but {} sizes", t.len())));
        }
        let cols = get("cols")?;
        if cols == "-" {
            PartitionPlan::new(t, gradients, pairs, psi, l1, l2)
        } else {
            let counts: Vec<usize> = parse_list("cols", cols)?;
            PartitionPlan::with_columns(counts, gradients, pairs, psi, l1, l2)
        }
    }
}

/// Reflection coefficients of a realized plan, in the RIS flat layout.
///
/// Element `(ix, iy)` of sub-surface `s` gets phase
/// `psi_s + k*ix*g_x + k*iy*g_y` with `k = 2*pi*d/lambda` (0-based indices).
pub fn build_theta(plan: &PartitionPlan, ris: &RisGeometry) -> Result<Vec<Complex64>> {
    let counts = plan.realized_counts(ris)?;
    let k = ris.wavenumber();
    let mut owner = Vec::with_capacity(ris.ny());
    for (s, &c) in counts.iter().enumerate() {
        owner.extend(std::iter::repeat_n(s, c));
    }
    let mut theta = vec![Complex64::new(0.0, 0.0); ris.element_count()];
    for ix in 0..ris.nx() {
        for (iy, &s) in owner.iter().enumerate() {
            let g = plan.gradients[s];
            let phase = plan.common_phases[s] + k * ix as f64 * g.g_x + k * iy as f64 * g.g_y;
            theta[ris.flat_index(ix, iy)] = Complex64::from_polar(1.0, phase);
        }
    }
    Ok(theta)
}

/// `(1/N) * sum_n theta_n * exp(-j k (ix*zeta_x + iy*zeta_y))`.
pub fn gain_direct_sum(theta: &[Complex64], ris: &RisGeometry, zeta: PhaseGradient) -> Complex64 {
    let k = ris.wavenumber();
    let mut acc = Complex64::new(0.0, 0.0);
    for ix in 0..ris.nx() {
        for iy in 0..ris.ny() {
            let phase = -k * (ix as f64 * zeta.g_x + iy as f64 * zeta.g_y);
            acc += theta[ris.flat_index(ix, iy)] * Complex64::from_polar(1.0, phase);
        }
    }
    acc / ris.element_count() as f64
}

/// Same as [`gain_direct_sum`] for a plain steering-style vector.
pub fn gain_direct_sum_vec(theta: &CVector, ris: &RisGeometry, zeta: PhaseGradient) -> Complex64 {
    gain_direct_sum(theta.as_slice(), ris, zeta)
}

/// `sin(K x) / (K sin x)`, continuous at the removable singularities.
pub fn dirichlet_ratio(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if x.abs() < 1e-9 {
        return 1.0;
    }
    let s = x.sin();
    if s.abs() < 1e-9 {
        let m = (x / PI).round() as i64;
        return if (m * (k as i64 - 1)).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
    }
    (k as f64 * x).sin() / (k as f64 * s)
}

/// Closed-form gain of a rectangular block of `wx x wy` elements whose first
/// element sits at `(ox, oy)`, carrying a globally continuous gradient `g`
/// and common phase `psi`. Returns `(1/(wx*wy)) * sum over the block`.
fn block_gain(
    k: f64,
    (ox, oy): (usize, usize),
    (wx, wy): (usize, usize),
    psi: f64,
    g: PhaseGradient,
    zeta: PhaseGradient,
) -> Complex64 {
    let (ex, ey) = g.mismatch(&zeta);
    let psi_tilde = psi
        + k * (ox as f64 * ex + oy as f64 * ey)
        + 0.5 * k * (wx as f64 - 1.0) * ex
        + 0.5 * k * (wy as f64 - 1.0) * ey;
    let magnitude = dirichlet_ratio(wx, 0.5 * k * ex) * dirichlet_ratio(wy, 0.5 * k * ey);
    Complex64::from_polar(1.0, psi_tilde) * magnitude
}

/// Sub-surface sum of Dirichlet-ratio terms; equals [`gain_direct_sum`] of
/// [`build_theta`] for the same plan.
pub fn gain_closed_form(plan: &PartitionPlan, ris: &RisGeometry, zeta: PhaseGradient) -> Result<Complex64> {
    let counts = plan.realized_counts(ris)?;
    let k = ris.wavenumber();
    let ny = ris.ny() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut offset = 0;
    for (s, &c) in counts.iter().enumerate() {
        if c > 0 {
            let term = block_gain(
                k,
                (0, offset),
                (ris.nx(), c),
                plan.common_phases[s],
                plan.gradients[s],
                zeta,
            );
            acc += term * (c as f64 / ny);
        }
        offset += c;
    }
    Ok(acc)
}

/// Large-array limit: only exactly aligned sub-surfaces contribute `t_s e^{j psi_s}`.
pub fn gain_asymptotic(plan: &PartitionPlan, zeta: PhaseGradient) -> Complex64 {
    plan.gradients
        .iter()
        .zip(&plan.t)
        .zip(&plan.common_phases)
        .filter(|((g, _), _)| g.is_aligned_with(&zeta))
        .map(|((_, &t), &psi)| Complex64::from_polar(t, psi))
        .sum()
}

/// Result of apportioning `ny` columns to fractional sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedPartition {
    /// Column count per input sub-surface (0 for dropped ones).
    pub counts: Vec<usize>,
    /// Realized sizes `counts / ny`.
    pub t: Vec<f64>,
    /// Sub-surfaces with `t_s > 0` that received no column.
    pub dropped: Vec<usize>,
}

impl RoundedPartition {
    pub fn was_reapportioned(&self) -> bool {
        !self.dropped.is_empty()
    }
}

fn largest_remainder(t: &[f64], ny: usize) -> Vec<usize> {
    let total: f64 = t.iter().sum();
    let quotas: Vec<f64> = t.iter().map(|&x| x / total * ny as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-12).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remaining = ny.saturating_sub(assigned);
    let mut remainders: Vec<Option<f64>> = quotas
        .iter()
        .zip(&counts)
        .map(|(q, &c)| if t.is_empty() { None } else { Some(q - c as f64) })
        .collect();
    while remaining > 0 {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in remainders.iter().enumerate() {
            if let Some(r) = *r {
                if t[i] > 0.0 && best.is_none_or(|(_, b)| r > b + 1e-12) {
                    best = Some((i, r));
                }
            }
        }
        let Some((i, _)) = best else { break };
        counts[i] += 1;
        remainders[i] = None;
        remaining -= 1;
    }
    counts
}

/// Largest-remainder apportionment of `ny` columns with lowest-index tie-break.
/// Positive sizes that receive no column are dropped and the columns are
/// re-apportioned over the survivors.
pub fn round_partition(t: &[f64], ny: usize) -> Result<RoundedPartition> {
    if t.is_empty() || ny == 0 {
        return Err(Error::Partition("need at least one size and one column".into()));
    }
    if t.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Partition(format!("sizes must be nonnegative: {t:?}")));
    }
    let sum: f64 = t.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Partition(format!("sizes sum to {sum}, expected 1")));
    }
    let mut live: Vec<f64> = t.to_vec();
    let mut dropped = Vec::new();
    let counts = loop {
        let counts = largest_remainder(&live, ny);
        let newly: Vec<usize> = (0..live.len()).filter(|&s| live[s] > 0.0 && counts[s] == 0).collect();
        if newly.is_empty() {
            break counts;
        }
        for s in newly {
            live[s] = 0.0;
            dropped.push(s);
        }
    };
    dropped.sort_unstable();
    let t = counts.iter().map(|&c| c as f64 / ny as f64).collect();
    Ok(RoundedPartition { counts, t, dropped })
}

/// Two-dimensional tiling of the RIS into `Nx^alpha x Ny^alpha` equal tiles,
/// each owned by one sub-surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePlan {
    alpha: f64,
    tiles_x: usize,
    tiles_y: usize,
    tile_w: usize,
    tile_h: usize,
    assignment: Vec<usize>,
    gradients: Vec<PhaseGradient>,
    common_phases: Vec<f64>,
    mu: Vec<f64>,
}

fn tile_count(n: usize, alpha: f64) -> Result<usize> {
    let exact = (n as f64).powf(alpha);
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-9 || rounded < 1.0 || !n.is_multiple_of(rounded as usize) {
        return Err(Error::Partition(format!(
            "{n}^{alpha} = {exact} is not an integer divisor of {n}"
        )));
    }
    Ok(rounded as usize)
}

impl TilePlan {
    /// `assignment[mx * tiles_y + my]` is the sub-surface owning tile `(mx, my)`.
    pub fn new(
        ris: &RisGeometry,
        alpha: f64,
        assignment: Vec<usize>,
        gradients: Vec<PhaseGradient>,
        common_phases: Vec<f64>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Partition(format!("alpha = {alpha} outside (0, 1)")));
        }
        let tiles_x = tile_count(ris.nx(), alpha)?;
        let tiles_y = tile_count(ris.ny(), alpha)?;
        let s = gradients.len();
        if common_phases.len() != s || s == 0 {
            return Err(Error::Partition(format!(
                "{s} gradients, {} phases",
                common_phases.len()
            )));
        }
        if assignment.len() != tiles_x * tiles_y {
            return Err(Error::Partition(format!(
                "{} tile assignments for a {tiles_x}x{tiles_y} grid",
                assignment.len()
            )));
        }
        if let Some(bad) = assignment.iter().find(|&&a| a >= s) {
            return Err(Error::Partition(format!("tile assigned to unknown sub-surface {bad}")));
        }
        let total = (tiles_x * tiles_y) as f64;
        let mut mu = vec![0.0; s];
        for &a in &assignment {
            mu[a] += 1.0 / total;
        }
        Ok(Self {
            alpha,
            tiles_x,
            tiles_y,
            tile_w: ris.nx() / tiles_x,
            tile_h: ris.ny() / tiles_y,
            assignment,
            gradients,
            common_phases: common_phases.into_iter().map(wrap_phase).collect(),
            mu,
        })
    }

    /// Assigns tiles to sub-surfaces in column-major raster order
    /// (`my` outer, `mx` inner), `mu_s * N^alpha` tiles each.
    /// Rejects fractions that do not give an integer tile count.
    pub fn from_fractions(
        ris: &RisGeometry,
        alpha: f64,
        mu: &[f64],
        gradients: Vec<PhaseGradient>,
        common_phases: Vec<f64>,
    ) -> Result<Self> {
        let tiles_x = tile_count(ris.nx(), alpha)?;
        let tiles_y = tile_count(ris.ny(), alpha)?;
        let total = tiles_x * tiles_y;
        let mut counts = Vec::with_capacity(mu.len());
        for &m in mu {
            let exact = m * total as f64;
            if (exact - exact.round()).abs() > 1e-9 || exact < -1e-9 {
                return Err(Error::Partition(format!(
                    "mu = {m} times {total} tiles is not an integer"
                )));
            }
            counts.push(exact.round() as usize);
        }
        if counts.iter().sum::<usize>() != total {
            return Err(Error::Partition("fractions do not cover every tile".into()));
        }
        let mut assignment = vec![0; total];
        let mut order = (0..tiles_y).flat_map(|my| (0..tiles_x).map(move |mx| mx * tiles_y + my));
        for (s, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                assignment[order.next().expect("counts sum to total")] = s;
            }
        }
        Self::new(ris, alpha, assignment, gradients, common_phases)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.tiles_x, self.tiles_y)
    }

    pub fn tile_size(&self) -> (usize, usize) {
        (self.tile_w, self.tile_h)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn owner(&self, mx: usize, my: usize) -> usize {
        self.assignment[mx * self.tiles_y + my]
    }

    /// Phase of the first element of tile `(mx, my)`, chosen so all tiles of
    /// a sub-surface continue one gradient across the whole aperture.
    pub fn tile_phase(&self, mx: usize, my: usize, ris: &RisGeometry) -> f64 {
        let s = self.owner(mx, my);
        let g = self.gradients[s];
        let k = ris.wavenumber();
        wrap_phase(self.common_phases[s] + k * ((mx * self.tile_w) as f64 * g.g_x + (my * self.tile_h) as f64 * g.g_y))
    }

    /// Reflection coefficients of the tiled surface.
    pub fn theta(&self, ris: &RisGeometry) -> Vec<Complex64> {
        let k = ris.wavenumber();
        let mut theta = vec![Complex64::new(0.0, 0.0); ris.element_count()];
        for mx in 0..self.tiles_x {
            for my in 0..self.tiles_y {
                let g = self.gradients[self.owner(mx, my)];
                let base = self.tile_phase(mx, my, ris);
                for lx in 0..self.tile_w {
                    for ly in 0..self.tile_h {
                        let phase = base + k * (lx as f64 * g.g_x + ly as f64 * g.g_y);
                        theta[ris.flat_index(mx * self.tile_w + lx, my * self.tile_h + ly)] =
                            Complex64::from_polar(1.0, phase);
                    }
                }
            }
        }
        theta
    }
}

/// Closed-form gain of a tiled surface: one Dirichlet-ratio block per tile.
pub fn tile_plan_gain(tiles: &TilePlan, ris: &RisGeometry, zeta: PhaseGradient) -> Complex64 {
    let k = ris.wavenumber();
    let total = (tiles.tiles_x * tiles.tiles_y) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for mx in 0..tiles.tiles_x {
        for my in 0..tiles.tiles_y {
            let s = tiles.owner(mx, my);
            acc += block_gain(
                k,
                (mx * tiles.tile_w, my * tiles.tile_h),
                (tiles.tile_w, tiles.tile_h),
                tiles.common_phases[s],
                tiles.gradients[s],
                zeta,
            );
        }
    }
    acc / total
}

/// Large-array limit of [`tile_plan_gain`]: `sum_s 1{aligned} mu_s e^{j psi_s}`.
pub fn tile_plan_gain_asymptotic(tiles: &TilePlan, zeta: PhaseGradient) -> Complex64 {
    tiles
        .gradients
        .iter()
        .zip(&tiles.mu)
        .zip(&tiles.common_phases)
        .filter(|((g, _), _)| g.is_aligned_with(&zeta))
        .map(|((_, &mu), &psi)| Complex64::from_polar(mu, psi))
        .sum()
}
