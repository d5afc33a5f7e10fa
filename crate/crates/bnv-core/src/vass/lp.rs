//! Small exact-rational linear-programming feasibility solver (phase-one
//! simplex with Bland's rule). Used by the cycle-space analysis of the
//! repeated-coverability decision procedure, where answers must be exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// One linear constraint `sum coeff_i * x_i (cmp) rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, i64)>,
    pub cmp: Cmp,
    pub rhs: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Ge,
}

fn rat(v: i64) -> BigRational {
    BigRational::from(BigInt::from(v))
}

/// Finds a nonnegative rational solution of the constraint system, if any.
pub fn feasible(num_vars: usize, constraints: &[Constraint]) -> Option<Vec<BigRational>> {
    // Standard form: surplus variable per >= row, artificial per row,
    // right-hand sides made nonnegative.
    let m = constraints.len();
    let num_surplus = constraints.iter().filter(|c| c.cmp == Cmp::Ge).count();
    let n_total = num_vars + num_surplus + m;
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    let mut rhs: Vec<BigRational> = Vec::with_capacity(m);
    let mut surplus_at = 0usize;
    for (i, c) in constraints.iter().enumerate() {
        let mut row = vec![BigRational::zero(); n_total];
        for &(j, a) in &c.coeffs {
            row[j] += rat(a);
        }
        if c.cmp == Cmp::Ge {
            row[num_vars + surplus_at] = -BigRational::one();
            surplus_at += 1;
        }
        let mut b = rat(c.rhs);
        if b.is_negative() {
            for e in row.iter_mut() {
                *e = -e.clone();
            }
            b = -b;
        }
        row[num_vars + num_surplus + i] = BigRational::one();
        rows.push(row);
        rhs.push(b);
    }

    // objective: minimize the sum of artificials
    let mut z = vec![BigRational::zero(); n_total];
    let mut z0 = BigRational::zero();
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n_total {
            z[j] -= row[j].clone();
        }
        z0 -= rhs[i].clone();
        // cancel the artificial's own coefficient back to zero
        z[num_vars + num_surplus + i] += BigRational::one();
    }
    let mut basis: Vec<usize> = (0..m).map(|i| num_vars + num_surplus + i).collect();

    loop {
        // Bland: entering variable = smallest index with negative reduced cost
        let Some(enter) = (0..n_total).find(|&j| z[j].is_negative()) else {
            break;
        };
        // ratio test, smallest basis index on ties
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for i in 0..m {
            if rows[i][enter].is_positive() {
                let ratio = rhs[i].clone() / rows[i][enter].clone();
                let better = match &best {
                    None => true,
                    Some(b) => ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()]),
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        // the phase-one objective is bounded below by zero, so a pivot row exists
        let leave = leave.expect("phase-one simplex cannot be unbounded");
        // pivot
        let piv = rows[leave][enter].clone();
        for e in rows[leave].iter_mut() {
            *e /= piv.clone();
        }
        rhs[leave] /= piv;
        for i in 0..m {
            if i != leave && !rows[i][enter].is_zero() {
                let f = rows[i][enter].clone();
                for j in 0..n_total {
                    let t = rows[leave][j].clone() * f.clone();
                    rows[i][j] -= t;
                }
                let t = rhs[leave].clone() * f;
                rhs[i] -= t;
            }
        }
        if !z[enter].is_zero() {
            let f = z[enter].clone();
            for j in 0..n_total {
                let t = rows[leave][j].clone() * f.clone();
                z[j] -= t;
            }
            z0 -= rhs[leave].clone() * f;
        }
        basis[leave] = enter;
    }

    if !z0.is_zero() {
        return None; // artificials cannot all vanish: infeasible
    }
    let mut x = vec![BigRational::zero(); num_vars];
    for i in 0..m {
        if basis[i] < num_vars {
            x[basis[i]] = rhs[i].clone();
        } else if basis[i] >= num_vars + num_surplus && !rhs[i].is_zero() {
            // degenerate artificial still basic at zero is fine; nonzero is not
            return None;
        }
    }
    Some(x)
}
