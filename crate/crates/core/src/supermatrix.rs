//! The superiorization matrix.
//!
//! Row `n` holds `𝓜(n,0), …, 𝓜(n,n+1)`:
//!
//! ```text
//! 𝓜(0,0) = x₀
//! 𝓜(n,k) = A_n(𝓜(n−1,k))       k ≤ n
//! 𝓜(n,n+1) = 𝓜(n,n) + β_n v_n
//! ```
//!
//! Column 0 is the basic trajectory, the diagonal is the superiorized one,
//! and column `k` is the basic trajectory restarted after the first `k`
//! perturbations. [`SupMatrix`] stores every entry; [`ColumnTrace`] follows
//! only the diagonal and a chosen set of columns.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::feasibility::{
    checked_direction, perturb, DirectionRule, OperatorSequence, PerturbationSchedule, TargetFunction,
};
use crate::geometry::Vector;

/// Default cap on the memory used by a fully materialized matrix.
pub const DEFAULT_MEMORY_BUDGET: u128 = 2 * 1024 * 1024 * 1024;

/// Default relative tolerance for column settlement.
pub const SETTLE_TOL: f64 = 1e-10;

/// Entries stored by a matrix with rows `0..=n_max`.
pub fn entry_count(n_max: usize) -> u128 {
    let n = n_max as u128;
    (n + 1) * (n + 4) / 2
}

/// Bytes needed to materialize rows `0..=n_max` in dimension `dim`.
pub fn required_bytes(n_max: usize, dim: usize) -> u128 {
    entry_count(n_max) * dim as u128 * std::mem::size_of::<f64>() as u128
}

#[derive(Debug, Clone)]
pub struct SupMatrix {
    rows: Vec<Vec<Vector>>,
    operators: OperatorSequence,
    schedule: PerturbationSchedule,
    directions: Vec<Vector>,
}

/// `Δ_{k,i} = 𝓜(k,i+1) − 𝓜(k,i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub row: usize,
    pub col: usize,
    pub delta: Vector,
}

/// Deepest entry of a column and whether it has stopped moving.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLimit {
    pub col: usize,
    pub point: Vector,
    /// Row of `point`.
    pub depth: usize,
    /// Movement over the last sweep; `None` if the column is shorter than one sweep.
    pub last_change: Option<f64>,
    pub settled: bool,
}

fn direction_at(
    schedule: &PerturbationSchedule,
    rule: &dyn DirectionRule,
    n: usize,
    x: &Vector,
) -> Result<(f64, Vector)> {
    let beta = schedule.beta(n);
    let v = if beta == 0.0 {
        Vector::zeros(x.len())
    } else {
        checked_direction(rule, n, x)?
    };
    Ok((beta, v))
}

/// Builds rows `0..=n_max` with the default 2 GB budget.
pub fn build(
    seq: &OperatorSequence,
    x0: &Vector,
    schedule: &PerturbationSchedule,
    direction: &dyn DirectionRule,
    n_max: usize,
) -> Result<SupMatrix> {
    build_with_budget(seq, x0, schedule, direction, n_max, DEFAULT_MEMORY_BUDGET)
}

/// Builds rows `0..=n_max`, refusing if they would need more than `budget`
/// bytes.
pub fn build_with_budget(
    seq: &OperatorSequence,
    x0: &Vector,
    schedule: &PerturbationSchedule,
    direction: &dyn DirectionRule,
    n_max: usize,
    budget: u128,
) -> Result<SupMatrix> {
    check_dim(seq.dim(), x0.len())?;
    let requested = required_bytes(n_max, x0.len());
    if requested > budget {
        return Err(Error::CapacityExceeded { requested, budget });
    }
    let mut rows: Vec<Vec<Vector>> = Vec::with_capacity(n_max + 1);
    let mut directions = Vec::with_capacity(n_max + 1);
    let (beta, v) = direction_at(schedule, direction, 0, x0)?;
    rows.push(vec![x0.clone(), perturb(x0, beta, &v)]);
    directions.push(v);
    for n in 1..=n_max {
        let prev = &rows[n - 1];
        let mut row: Vec<Vector> = prev.iter().map(|x| seq.apply_unchecked(n, x)).collect();
        let (beta, v) = direction_at(schedule, direction, n, &row[n])?;
        row.push(perturb(&row[n], beta, &v));
        directions.push(v);
        rows.push(row);
    }
    Ok(SupMatrix {
        rows,
        operators: seq.clone(),
        schedule: *schedule,
        directions,
    })
}

fn out_of_range(n: usize, k: usize) -> Error {
    Error::OutOfRange(format!("entry ({n}, {k})"))
}

impl SupMatrix {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.rows[0][0].len()
    }

    pub fn operators(&self) -> &OperatorSequence {
        &self.operators
    }

    pub fn schedule(&self) -> &PerturbationSchedule {
        &self.schedule
    }

    /// `𝓜(n,k)`, defined for `k ≤ n + 1 ≤ n_max + 1`.
    pub fn entry(&self, n: usize, k: usize) -> Result<&Vector> {
        self.rows
            .get(n)
            .and_then(|r| r.get(k))
            .ok_or_else(|| out_of_range(n, k))
    }

    pub fn row(&self, n: usize) -> Result<&[Vector]> {
        self.rows
            .get(n)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfRange(format!("row {n}")))
    }

    /// First row in which column `k` exists.
    pub fn column_start(k: usize) -> usize {
        k.saturating_sub(1)
    }

    /// Column `k` from its first row down to `n_max`.
    pub fn column(&self, k: usize) -> Result<Vec<&Vector>> {
        if k > self.n_max() + 1 {
            return Err(Error::OutOfRange(format!("column {k}")));
        }
        Ok((Self::column_start(k)..=self.n_max())
            .map(|n| &self.rows[n][k])
            .collect())
    }

    /// `𝓜(n,n)` for `n = 0..=n_max`: the superiorized iterates.
    pub fn diagonal(&self) -> Vec<&Vector> {
        self.rows.iter().enumerate().map(|(n, r)| &r[n]).collect()
    }

    /// Recorded `v_n`.
    pub fn direction(&self, n: usize) -> Result<&Vector> {
        self.directions
            .get(n)
            .ok_or_else(|| Error::OutOfRange(format!("direction {n}")))
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.schedule.beta(n)
    }

    /// `|φ(𝓜(n,0)) − φ(𝓜(n,n)) − Σ_{k=1..n} [φ(𝓜(n,k−1)) − φ(𝓜(n,k))]|`.
    pub fn telescoping_residual(&self, n: usize, phi: &dyn TargetFunction) -> Result<f64> {
        let row = self.row(n)?;
        let values: Vec<f64> = row[..=n].iter().map(|x| phi.value(x)).collect();
        let mut sum = crate::stats::CompensatedSum::default();
        for k in 1..=n {
            sum.add(values[k - 1] - values[k]);
        }
        Ok((values[0] - values[n] - sum.total()).abs())
    }

    /// `Δ_{k,i}`, defined for `i ≤ k ≤ n_max`. At `k = i` the increment is
    /// `β_i v_i` by construction and is returned in that form.
    pub fn increment(&self, k: usize, i: usize) -> Result<Increment> {
        if i > k || k > self.n_max() {
            return Err(Error::OutOfRange(format!("increment ({k}, {i})")));
        }
        let delta = if k == i {
            &self.directions[i] * self.beta(i)
        } else {
            &self.rows[k][i + 1] - &self.rows[k][i]
        };
        Ok(Increment { row: k, col: i, delta })
    }

    /// Angle in `[0, π]` between `Δ_{n,i}` and `v_i`.
    pub fn angle_drift(&self, i: usize, n: usize) -> Result<f64> {
        let inc = self.increment(n, i)?;
        let v = &self.directions[i];
        if n == i {
            return if inc.delta.norm() > 0.0 {
                Ok(0.0)
            } else {
                Err(Error::ZeroIncrement)
            };
        }
        angle_between(&inc.delta, v)
    }

    /// Deepest entry of column `k` and its settlement status.
    pub fn column_limit(&self, k: usize, tol: f64) -> Result<ColumnLimit> {
        let column: Vec<Vector> = self.column(k)?.into_iter().cloned().collect();
        Ok(limit_of(
            k,
            Self::column_start(k),
            &column,
            self.operators.period(),
            tol,
        ))
    }

    /// `n,k,norm,phi` for every stored entry.
    pub fn write_entries_csv<W: Write>(&self, phi: &dyn TargetFunction, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "k", "norm", "phi"])?;
        for (n, row) in self.rows.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                w.write_record([
                    n.to_string(),
                    k.to_string(),
                    format!("{:e}", x.norm()),
                    format!("{:e}", phi.value(x)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Residual of the telescoping identity in row `n`.
pub fn telescoping_check(m: &SupMatrix, n: usize, phi: &dyn TargetFunction) -> Result<f64> {
    m.telescoping_residual(n, phi)
}

pub fn column_limit(m: &SupMatrix, k: usize, tol: f64) -> Result<ColumnLimit> {
    m.column_limit(k, tol)
}

pub fn increment(m: &SupMatrix, k: usize, i: usize) -> Result<Increment> {
    m.increment(k, i)
}

pub fn angle_drift(m: &SupMatrix, i: usize, n: usize) -> Result<f64> {
    m.angle_drift(i, n)
}

/// Angle in `[0, π]`, computed as `2·atan2(‖â − b̂‖, ‖â + b̂‖)`.
pub fn angle_between(a: &Vector, b: &Vector) -> Result<f64> {
    let (la, lb) = (a.norm(), b.norm());
    if la == 0.0 || lb == 0.0 {
        return Err(Error::ZeroIncrement);
    }
    let (ua, ub) = (a / la, b / lb);
    Ok(2.0 * (&ua - &ub).norm().atan2((&ua + &ub).norm()))
}

fn limit_of(col: usize, start: usize, column: &[Vector], period: usize, tol: f64) -> ColumnLimit {
    let last = column.last().expect("columns are nonempty");
    let last_change = (column.len() > period).then(|| {
        let earlier = &column[column.len() - 1 - period];
        (last - earlier).norm()
    });
    let settled = last_change.is_some_and(|c| c <= tol * (1.0 + last.norm()));
    ColumnLimit {
        col,
        point: last.clone(),
        depth: start + column.len() - 1,
        last_change,
        settled,
    }
}

/// One row of a drift table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DriftRow {
    pub i: usize,
    pub n: usize,
    pub angle: f64,
    pub delta_norm: f64,
}

/// `i,n,angle,delta_norm` rows.
pub fn write_drift_csv<W: Write>(rows: &[DriftRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "n", "angle", "delta_norm"])?;
    for r in rows {
        w.write_record([
            r.i.to_string(),
            r.n.to_string(),
            format!("{:e}", r.angle),
            format!("{:e}", r.delta_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The diagonal and a chosen set of columns, computed without storing the
/// rest of the matrix. Entries agree bitwise with [`build`].
#[derive(Debug, Clone)]
pub struct ColumnTrace {
    n_max: usize,
    period: usize,
    schedule: PerturbationSchedule,
    diagonal: Vec<Vector>,
    columns: BTreeMap<usize, Vec<Vector>>,
    directions: BTreeMap<usize, Vector>,
}

/// Follows rows `0..=n_max` keeping only the diagonal and `columns`.
pub fn trace_columns(
    seq: &OperatorSequence,
    x0: &Vector,
    schedule: &PerturbationSchedule,
    direction: &dyn DirectionRule,
    n_max: usize,
    columns: &[usize],
) -> Result<ColumnTrace> {
    check_dim(seq.dim(), x0.len())?;
    if let Some(&k) = columns.iter().find(|&&k| k > n_max + 1) {
        return Err(Error::OutOfRange(format!("column {k}")));
    }
    let mut cols: BTreeMap<usize, Vec<Vector>> = columns.iter().map(|&k| (k, Vec::new())).collect();
    let mut dirs = BTreeMap::new();
    let mut diagonal = Vec::with_capacity(n_max + 1);
    let mut x = x0.clone();
    for n in 0..=n_max {
        if n > 0 {
            for (&k, col) in cols.iter_mut() {
                if let Some(prev) = col.last() {
                    if k <= n {
                        let next = seq.apply_unchecked(n, prev);
                        col.push(next);
                    }
                }
            }
        }
        if let Some(col) = cols.get_mut(&n) {
            if col.is_empty() {
                col.push(x.clone());
            }
        }
        let (beta, v) = direction_at(schedule, direction, n, &x)?;
        let side = perturb(&x, beta, &v);
        if cols.contains_key(&n) {
            dirs.insert(n, v);
        }
        if let Some(col) = cols.get_mut(&(n + 1)) {
            col.push(side.clone());
        }
        diagonal.push(x);
        x = if n < n_max {
            seq.apply_unchecked(n + 1, &side)
        } else {
            side
        };
    }
    Ok(ColumnTrace {
        n_max,
        period: seq.period(),
        schedule: *schedule,
        diagonal,
        columns: cols,
        directions: dirs,
    })
}

impl ColumnTrace {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn diagonal(&self) -> &[Vector] {
        &self.diagonal
    }

    /// Stored entries of column `k`, starting at row `max(k − 1, 0)`.
    pub fn column(&self, k: usize) -> Result<&[Vector]> {
        self.columns
            .get(&k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfRange(format!("column {k} not traced")))
    }

    pub fn entry(&self, n: usize, k: usize) -> Result<&Vector> {
        if n > self.n_max {
            return Err(out_of_range(n, k));
        }
        let col = self.column(k)?;
        n.checked_sub(SupMatrix::column_start(k))
            .and_then(|j| col.get(j))
            .ok_or_else(|| out_of_range(n, k))
    }

    /// `v_k` for a traced column `k`.
    pub fn direction(&self, k: usize) -> Result<&Vector> {
        self.directions
            .get(&k)
            .ok_or_else(|| Error::OutOfRange(format!("direction {k} not traced")))
    }

    /// `Δ_{k,i}`; needs columns `i` and `i + 1` traced.
    pub fn increment(&self, k: usize, i: usize) -> Result<Increment> {
        if i > k || k > self.n_max {
            return Err(Error::OutOfRange(format!("increment ({k}, {i})")));
        }
        let delta = if k == i {
            self.direction(i)? * self.schedule.beta(i)
        } else {
            self.entry(k, i + 1)? - self.entry(k, i)?
        };
        Ok(Increment { row: k, col: i, delta })
    }

    pub fn angle_drift(&self, i: usize, n: usize) -> Result<f64> {
        let inc = self.increment(n, i)?;
        if n == i {
            return if inc.delta.norm() > 0.0 {
                Ok(0.0)
            } else {
                Err(Error::ZeroIncrement)
            };
        }
        angle_between(&inc.delta, self.direction(i)?)
    }

    pub fn column_limit(&self, k: usize, tol: f64) -> Result<ColumnLimit> {
        let col = self.column(k)?;
        Ok(limit_of(k, SupMatrix::column_start(k), col, self.period, tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{basic_trajectory, superiorized_trajectory, FixedDirection, Linear, Nonascent};
    use crate::geometry::{ConvexBody, HalfSpace};
    use crate::randgen::{uniform_sphere, RngStream};
    use nalgebra::dvector;

    fn identity_ops(dim: usize) -> OperatorSequence {
        let mut e = Vector::zeros(dim);
        e[0] = 1.0;
        OperatorSequence::cyclic(vec![HalfSpace::new(e, 1e300).unwrap().into()]).unwrap()
    }

    fn random_instance(seed: u64, n: usize, i: usize) -> (OperatorSequence, Vector, Linear) {
        let mut rng = RngStream::new(seed, 0).rng();
        let cons: Vec<ConvexBody> = (0..i)
            .map(|_| {
                let u = uniform_sphere(n, &mut rng).unwrap();
                HalfSpace::new(u, -0.2).unwrap().into()
            })
            .collect();
        let c = uniform_sphere(n, &mut rng).unwrap();
        let x0 = uniform_sphere(n, &mut rng).unwrap() * 3.0;
        (OperatorSequence::cyclic(cons).unwrap(), x0, Linear { c, a: 0.5 })
    }

    #[test]
    fn entry_count_matches_rows() {
        for n in 0..10 {
            let total: usize = (0..=n).map(|r| r + 2).sum();
            assert_eq!(entry_count(n), total as u128);
        }
    }

    #[test]
    fn row_zero() {
        let seq = identity_ops(2);
        let v = dvector![0.6, 0.8];
        let m = build(
            &seq,
            &dvector![1.0, 1.0],
            &PerturbationSchedule::default(),
            &FixedDirection(v),
            0,
        )
        .unwrap();
        assert_eq!(m.entry(0, 0).unwrap(), &dvector![1.0, 1.0]);
        assert_eq!(m.entry(0, 1).unwrap(), &dvector![1.6, 1.8]);
        assert!(m.entry(0, 2).is_err());
        assert!(m.entry(1, 0).is_err());
    }

    #[test]
    fn identity_operators_accumulate() {
        let seq = identity_ops(2);
        let sched = PerturbationSchedule::new(1.0, 0.5).unwrap();
        let v = dvector![1.0, 0.0];
        let m = build(&seq, &dvector![0.0, 0.0], &sched, &FixedDirection(v.clone()), 6).unwrap();
        for n in 0..=6 {
            for k in 0..=n + 1 {
                let expect = if k == 0 { 0.0 } else { sched.partial_sum(0, k - 1) };
                assert!((m.entry(n, k).unwrap()[0] - expect).abs() < 1e-14, "{n},{k}");
            }
        }
        for i in 0..6 {
            for n in i..=6 {
                assert!(m.angle_drift(i, n).unwrap() < 1e-12);
            }
            let lim = m.column_limit(i, SETTLE_TOL).unwrap();
            assert!(lim.settled);
        }
    }

    #[test]
    fn column_zero_and_diagonal_match_drivers() {
        let (seq, x0, phi) = random_instance(1, 12, 4);
        let sched = PerturbationSchedule::default();
        let rule = Nonascent(phi);
        let m = build(&seq, &x0, &sched, &rule, 30).unwrap();
        let basic = basic_trajectory(&seq, &x0, 30).unwrap();
        let sup = superiorized_trajectory(&seq, &x0, &sched, &rule, 30).unwrap();
        for n in 0..=30 {
            assert_eq!(m.entry(n, 0).unwrap(), &basic[n]);
            assert_eq!(m.entry(n, n).unwrap(), &sup[n]);
        }
    }

    #[test]
    fn structure_recomputes_bitwise() {
        let (seq, x0, phi) = random_instance(2, 8, 3);
        let m = build(&seq, &x0, &PerturbationSchedule::default(), &Nonascent(phi), 20).unwrap();
        for n in 1..=20 {
            for k in 0..=n {
                let again = seq.apply(n, m.entry(n - 1, k).unwrap()).unwrap();
                assert_eq!(&again, m.entry(n, k).unwrap());
            }
        }
    }

    #[test]
    fn telescoping_and_bounds() {
        let (seq, x0, phi) = random_instance(3, 20, 5);
        let sched = PerturbationSchedule::default();
        let m = build(&seq, &x0, &sched, &Nonascent(phi.clone()), 40).unwrap();
        assert_eq!(telescoping_check(&m, 0, &phi).unwrap(), 0.0);
        for n in 0..=40 {
            let r = telescoping_check(&m, n, &phi).unwrap();
            let scale = 1.0 + phi.value(m.entry(n, 0).unwrap()).abs();
            assert!(r <= 1e-9 * scale);
            for s in 0..=n {
                let gap = (m.entry(n, s + 1).unwrap() - m.entry(n, s).unwrap()).norm();
                assert!(gap <= sched.beta(s) + 1e-12);
            }
            for k in 0..=n {
                let tail = (m.entry(n, n).unwrap() - m.entry(n, k).unwrap()).norm();
                assert!(tail <= sched.partial_sum(k, n) + 1e-12);
            }
        }
    }

    #[test]
    fn increments_shrink_down_a_column() {
        let (seq, x0, phi) = random_instance(4, 10, 4);
        let sched = PerturbationSchedule::default();
        let m = build(&seq, &x0, &sched, &Nonascent(phi), 25).unwrap();
        for i in 0..20 {
            let first = m.increment(i, i).unwrap();
            assert_eq!(first.delta, m.direction(i).unwrap() * sched.beta(i));
            let mut prev = first.delta.norm();
            for k in i + 1..=25 {
                let d = m.increment(k, i).unwrap().delta.norm();
                assert!(d <= prev + 1e-15);
                prev = d;
            }
        }
        assert!(m.increment(3, 4).is_err());
        assert!(m.increment(26, 1).is_err());
    }

    #[test]
    fn memory_guard() {
        let seq = identity_ops(1000);
        let err = build_with_budget(
            &seq,
            &Vector::zeros(1000),
            &PerturbationSchedule::default(),
            &FixedDirection(Vector::zeros(1000)),
            100,
            1_000_000,
        );
        assert!(matches!(err, Err(Error::CapacityExceeded { .. })));
    }

    #[test]
    fn trace_matches_full_build() {
        let (seq, x0, phi) = random_instance(5, 10, 3);
        let sched = PerturbationSchedule::default();
        let rule = Nonascent(phi);
        let m = build(&seq, &x0, &sched, &rule, 30).unwrap();
        let t = trace_columns(&seq, &x0, &sched, &rule, 30, &[0, 1, 5, 6, 31]).unwrap();
        for k in [0, 1, 5, 6, 31] {
            let full = m.column(k).unwrap();
            let part = t.column(k).unwrap();
            assert_eq!(full.len(), part.len());
            for (a, b) in full.iter().zip(part) {
                assert_eq!(*a, b);
            }
        }
        for n in 0..=30 {
            assert_eq!(m.entry(n, n).unwrap(), &t.diagonal()[n]);
        }
        for n in 5..=30 {
            assert_eq!(m.angle_drift(5, n).unwrap(), t.angle_drift(5, n).unwrap());
        }
        assert!(t.entry(3, 7).is_err());
        assert!(trace_columns(&seq, &x0, &sched, &rule, 30, &[40]).is_err());
    }

    #[test]
    fn angle_between_edges() {
        assert_eq!(angle_between(&dvector![1.0, 0.0], &dvector![2.0, 0.0]).unwrap(), 0.0);
        let pi = angle_between(&dvector![1.0, 0.0], &dvector![-1.0, 0.0]).unwrap();
        assert!((pi - std::f64::consts::PI).abs() < 1e-15);
        assert!(angle_between(&dvector![0.0, 0.0], &dvector![1.0, 0.0]).is_err());
    }

    #[test]
    fn csv_dumps() {
        let (seq, x0, phi) = random_instance(6, 5, 2);
        let m = build(&seq, &x0, &PerturbationSchedule::default(), &Nonascent(phi.clone()), 3).unwrap();
        let mut buf = Vec::new();
        m.write_entries_csv(&phi, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + entry_count(3) as usize);
        let mut buf = Vec::new();
        write_drift_csv(
            &[DriftRow {
                i: 0,
                n: 2,
                angle: 0.5,
                delta_norm: 0.25,
            }],
            &mut buf,
        )
        .unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("i,n,angle,delta_norm\n0,2,"));
    }
}
