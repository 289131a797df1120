//! Generic convex conic program: linear objective over named variable blocks,
//! with linear, convex-quadratic, and second-order-cone constraints plus
//! per-variable bounds. Solved by the log-barrier interior-point method in
//! [`ipm`].

pub mod ipm;

pub use ipm::{solve_ipm, IpmSettings, KktResiduals, SolveResult, SolveStatus};

/// Sparse affine expression `sum(coeff * x[idx]) + constant`.
#[derive(Debug, Clone, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }
}

/// One tagged constraint row.
#[derive(Debug, Clone)]
pub enum ConstraintKind {
    /// `sum(a_i x_i) <= rhs`
    LinearIneq { terms: Vec<(usize, f64)>, rhs: f64 },
    /// `sum(a_i x_i) == rhs`
    LinearEq { terms: Vec<(usize, f64)>, rhs: f64 },
    /// `sum(q_i x_i^2) + sum(a_i x_i) <= rhs` with all `q_i >= 0`
    Quadratic {
        quad: Vec<(usize, f64)>,
        terms: Vec<(usize, f64)>,
        rhs: f64,
    },
    /// `|| [rows] ||_2 <= bound`
    SecondOrderCone {
        rows: Vec<AffineExpr>,
        bound: AffineExpr,
    },
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
}

impl Constraint {
    /// Violation in function form (`<= 0` means satisfied).
    /// SOC rows use `||w|| - r`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ConstraintKind::LinearIneq { terms, rhs } => {
                terms.iter().fold(-rhs, |acc, &(i, c)| acc + c * x[i])
            }
            ConstraintKind::LinearEq { terms, rhs } => {
                (terms.iter().fold(-rhs, |acc, &(i, c)| acc + c * x[i])).abs()
            }
            ConstraintKind::Quadratic { quad, terms, rhs } => {
                let q: f64 = quad.iter().map(|&(i, c)| c * x[i] * x[i]).sum();
                terms.iter().fold(q - rhs, |acc, &(i, c)| acc + c * x[i])
            }
            ConstraintKind::SecondOrderCone { rows, bound } => {
                let norm = rows
                    .iter()
                    .map(|r| {
                        let v = r.eval(x);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                norm - bound.eval(x)
            }
        }
    }
}

/// Named contiguous slice of the variable vector.
#[derive(Debug, Clone)]
pub struct VarBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// A convex program with a linear objective.
///
/// Variables live in named blocks; constraints reference flat indices.
/// Bounds with `lo == hi` pin a variable, and the solver eliminates it
/// before barrier iterations.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    blocks: Vec<VarBlock>,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("constraint `{label}` references variable {index} out of range ({n} declared)")]
    IndexOutOfRange {
        label: String,
        index: usize,
        n: usize,
    },
    #[error("constraint `{label}` has a negative quadratic coefficient {coeff} on variable {index}")]
    IndefiniteQuadratic {
        label: String,
        index: usize,
        coeff: f64,
    },
    #[error("variable {index} has inverted bounds [{lo}, {hi}]")]
    InvertedBounds { index: usize, lo: f64, hi: f64 },
    #[error("duplicate block name `{0}`")]
    DuplicateBlock(String),
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Declare a named block of `len` variables; returns its offset.
    pub fn add_block(&mut self, name: &str, len: usize) -> usize {
        let offset = self.objective.len();
        self.blocks.push(VarBlock {
            name: name.to_string(),
            offset,
            len,
        });
        self.objective.extend(std::iter::repeat(0.0).take(len));
        self.lower
            .extend(std::iter::repeat(f64::NEG_INFINITY).take(len));
        self.upper.extend(std::iter::repeat(f64::INFINITY).take(len));
        offset
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Slice of a solution vector corresponding to a named block.
    pub fn block_values<'a>(&self, name: &str, x: &'a [f64]) -> &'a [f64] {
        let b = self.block(name).expect("unknown block");
        &x[b.offset..b.offset + b.len]
    }

    pub fn set_objective(&mut self, index: usize, coeff: f64) {
        self.objective[index] = coeff;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn set_bounds(&mut self, index: usize, lo: f64, hi: f64) {
        self.lower[index] = lo;
        self.upper[index] = hi;
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        (self.lower[index], self.upper[index])
    }

    pub fn add_linear_ineq(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::LinearIneq { terms, rhs },
        });
    }

    pub fn add_linear_eq(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::LinearEq { terms, rhs },
        });
    }

    pub fn add_quadratic(
        &mut self,
        label: impl Into<String>,
        quad: Vec<(usize, f64)>,
        terms: Vec<(usize, f64)>,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::Quadratic { quad, terms, rhs },
        });
    }

    pub fn add_soc(&mut self, label: impl Into<String>, rows: Vec<AffineExpr>, bound: AffineExpr) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::SecondOrderCone { rows, bound },
        });
    }

    /// Check structural invariants: index ranges, PSD quadratics, bound order.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.blocks {
            if !seen.insert(b.name.clone()) {
                return Err(ProgramError::DuplicateBlock(b.name.clone()));
            }
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > hi {
                return Err(ProgramError::InvertedBounds { index: i, lo, hi });
            }
        }
        for c in &self.constraints {
            let check = |idx: usize| -> Result<(), ProgramError> {
                if idx >= n {
                    Err(ProgramError::IndexOutOfRange {
                        label: c.label.clone(),
                        index: idx,
                        n,
                    })
                } else {
                    Ok(())
                }
            };
            match &c.kind {
                ConstraintKind::LinearIneq { terms, .. }
                | ConstraintKind::LinearEq { terms, .. } => {
                    for &(i, _) in terms {
                        check(i)?;
                    }
                }
                ConstraintKind::Quadratic { quad, terms, .. } => {
                    for &(i, q) in quad {
                        check(i)?;
                        if q < 0.0 {
                            return Err(ProgramError::IndefiniteQuadratic {
                                label: c.label.clone(),
                                index: i,
                                coeff: q,
                            });
                        }
                    }
                    for &(i, _) in terms {
                        check(i)?;
                    }
                }
                ConstraintKind::SecondOrderCone { rows, bound } => {
                    for r in rows.iter().chain(std::iter::once(bound)) {
                        for &(i, _) in &r.terms {
                            check(i)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump of variables and constraint rows, for external
    /// cross-checking.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for b in &self.blocks {
            writeln!(out, "block {} offset={} len={}", b.name, b.offset, b.len).unwrap();
        }
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                writeln!(out, "obj x{} {:+e}", i, c).unwrap();
            }
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_finite() || hi.is_finite() {
                writeln!(out, "bound x{} [{:e}, {:e}]", i, lo, hi).unwrap();
            }
        }
        let fmt_terms = |terms: &[(usize, f64)]| -> String {
            terms
                .iter()
                .map(|(i, c)| format!("{:+e}*x{}", c, i))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for c in &self.constraints {
            match &c.kind {
                ConstraintKind::LinearIneq { terms, rhs } => {
                    writeln!(out, "lin {}: {} <= {:e}", c.label, fmt_terms(terms), rhs).unwrap()
                }
                ConstraintKind::LinearEq { terms, rhs } => {
                    writeln!(out, "eq  {}: {} == {:e}", c.label, fmt_terms(terms), rhs).unwrap()
                }
                ConstraintKind::Quadratic { quad, terms, rhs } => writeln!(
                    out,
                    "quad {}: {} + {} <= {:e}",
                    c.label,
                    quad.iter()
                        .map(|(i, q)| format!("{:+e}*x{}^2", q, i))
                        .collect::<Vec<_>>()
                        .join(" "),
                    fmt_terms(terms),
                    rhs
                )
                .unwrap(),
                ConstraintKind::SecondOrderCone { rows, bound } => writeln!(
                    out,
                    "soc {}: ||[{}]|| <= {} {:+e}",
                    c.label,
                    rows.iter()
                        .map(|r| format!("{} {:+e}", fmt_terms(&r.terms), r.constant))
                        .collect::<Vec<_>>()
                        .join("; "),
                    fmt_terms(&bound.terms),
                    bound.constant
                )
                .unwrap(),
            }
        }
        out
    }
}
