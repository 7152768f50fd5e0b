use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::cone::{svec_len, ConeSpec};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// A named slice of the decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl VariableBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// `minimize cᵀz  subject to  A z + s = b,  s ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub cone: ConeSpec,
    pub variables: Vec<VariableBlock>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn variable(&self, name: &str) -> Option<&VariableBlock> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.nrows() != self.b.len() || self.a.ncols() != self.c.len() {
            return Err(Error::InvalidInput(format!(
                "A is {}x{} but b has {} and c has {} entries",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len(),
                self.c.len()
            )));
        }
        if self.cone.total_dim() != self.b.len() {
            return Err(Error::InvalidInput(format!(
                "cone dimension {} differs from row count {}",
                self.cone.total_dim(),
                self.b.len()
            )));
        }
        if !self.a.is_finite() || self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("problem data must be finite".into()));
        }
        Ok(())
    }

    /// Writes the problem in the plain-text exchange format:
    ///
    /// ```text
    /// conic-problem v1
    /// vars <n>
    /// rows <m>
    /// cone <zero_dim> <nonneg_dim> <k> <d_1> ... <d_k>
    /// block <name> <start> <len>        (one line per variable block)
    /// c <nnz>
    /// <index> <value>                   (nonzeros of c)
    /// b <nnz>
    /// <index> <value>                   (nonzeros of b)
    /// A <nnz>
    /// <row> <col> <value>               (triplets, row-major)
    /// ```
    ///
    /// Indices are zero-based and values use 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic-problem v1");
        let _ = writeln!(out, "vars {}", self.num_vars());
        let _ = writeln!(out, "rows {}", self.num_rows());
        let _ = write!(
            out,
            "cone {} {} {}",
            self.cone.zero_dim,
            self.cone.nonneg_dim,
            self.cone.psd_block_dims.len()
        );
        for d in &self.cone.psd_block_dims {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        for v in &self.variables {
            let _ = writeln!(out, "block {} {} {}", v.name, v.start, v.len);
        }
        for (tag, vec) in [("c", &self.c), ("b", &self.b)] {
            let nz: Vec<(usize, f64)> =
                vec.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
            let _ = writeln!(out, "{tag} {}", nz.len());
            for (i, v) in nz {
                let _ = writeln!(out, "{i} {v:.16e}");
            }
        }
        let _ = writeln!(out, "A {}", self.a.nnz());
        for (i, j, v) in self.a.triplets() {
            let _ = writeln!(out, "{i} {j} {v:.16e}");
        }
        out
    }

    /// Parses the format written by [`ConicProblem::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = TextLines(text.lines().filter(|l| !l.trim().is_empty()));

        if lines.next()?.first() != Some(&"conic-problem") {
            return Err(malformed("missing header"));
        }
        let n: usize = parse_num(lines.next()?.get(1).ok_or_else(|| malformed("vars"))?)?;
        let m: usize = parse_num(lines.next()?.get(1).ok_or_else(|| malformed("rows"))?)?;
        let cone_line = lines.next()?;
        if cone_line.len() < 4 || cone_line[0] != "cone" {
            return Err(malformed("cone line"));
        }
        let k: usize = parse_num(cone_line[3])?;
        if cone_line.len() != 4 + k {
            return Err(malformed("cone block count"));
        }
        let cone = ConeSpec {
            zero_dim: parse_num(cone_line[1])?,
            nonneg_dim: parse_num(cone_line[2])?,
            psd_block_dims: cone_line[4..].iter().map(|s| parse_num(s)).collect::<Result<_>>()?,
        };

        let mut variables = Vec::new();
        let mut line = lines.next()?;
        while line.first() == Some(&"block") {
            if line.len() != 4 {
                return Err(malformed("block line"));
            }
            variables.push(VariableBlock {
                name: line[1].to_string(),
                start: parse_num(line[2])?,
                len: parse_num(line[3])?,
            });
            line = lines.next()?;
        }
        let c = lines.sparse_vector(line, "c", n)?;
        let b_line = lines.next()?;
        let b = lines.sparse_vector(b_line, "b", m)?;

        let a_line = lines.next()?;
        if a_line.len() != 2 || a_line[0] != "A" {
            return Err(malformed("A"));
        }
        let nnz: usize = parse_num(a_line[1])?;
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let f = lines.next()?;
            if f.len() != 3 {
                return Err(malformed("A triplet"));
            }
            let (i, j): (usize, usize) = (parse_num(f[0])?, parse_num(f[1])?);
            if i >= m || j >= n {
                return Err(malformed("A index"));
            }
            triplets.push((i, j, parse_num(f[2])?));
        }
        let problem = ConicProblem {
            c,
            a: CsrMatrix::from_triplets(m, n, &triplets),
            b,
            cone,
            variables,
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn malformed(what: &str) -> Error {
    Error::InvalidInput(format!("malformed problem text: {what}"))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| malformed(&format!("bad number {s}")))
}

struct TextLines<'a, I: Iterator<Item = &'a str>>(I);

impl<'a, I: Iterator<Item = &'a str>> TextLines<'a, I> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        self.0
            .next()
            .map(|l| l.split_whitespace().collect())
            .ok_or_else(|| malformed("unexpected end"))
    }

    fn sparse_vector(&mut self, header: Vec<&str>, tag: &str, len: usize) -> Result<Vec<f64>> {
        if header.len() != 2 || header[0] != tag {
            return Err(malformed(tag));
        }
        let nnz: usize = parse_num(header[1])?;
        let mut v = vec![0.0; len];
        for _ in 0..nnz {
            let f = self.next()?;
            if f.len() != 2 {
                return Err(malformed(tag));
            }
            let i: usize = parse_num(f[0])?;
            if i >= len {
                return Err(malformed(tag));
            }
            v[i] = parse_num(f[1])?;
        }
        Ok(v)
    }
}

/// An affine scalar expression `constant + Σ coef · z[col]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(mut self, col: usize, coef: f64) -> Self {
        self.add_term(col, coef);
        self
    }

    pub fn add_term(&mut self, col: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((col, coef));
        }
    }
}

struct Row {
    terms: Vec<(usize, f64)>,
    rhs: f64,
}

impl Row {
    /// `expr ∈ cone` becomes `s = expr = b − A z`.
    fn from_membership(expr: AffineExpr) -> Self {
        Row {
            terms: expr.terms.into_iter().map(|(j, v)| (j, -v)).collect(),
            rhs: expr.constant,
        }
    }
}

/// Incremental assembly of a [`ConicProblem`]; rows may be added in any order
/// and are sorted into the canonical cone order on [`ProblemBuilder::build`].
#[derive(Default)]
pub struct ProblemBuilder {
    variables: Vec<VariableBlock>,
    num_vars: usize,
    objective: Vec<(usize, f64)>,
    zero_rows: Vec<Row>,
    nonneg_rows: Vec<Row>,
    psd_blocks: Vec<(usize, Vec<Row>)>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block of `len` free variables and returns its index range.
    pub fn add_variables(&mut self, name: &str, len: usize) -> Range<usize> {
        let start = self.num_vars;
        self.num_vars += len;
        self.variables.push(VariableBlock {
            name: name.to_string(),
            start,
            len,
        });
        start..start + len
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_objective(&mut self, col: usize, coef: f64) {
        self.objective.push((col, coef));
    }

    /// `Σ terms · z = rhs`.
    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.zero_rows.push(Row { terms, rhs });
    }

    /// `expr ≥ 0`.
    pub fn add_nonneg(&mut self, expr: AffineExpr) {
        self.nonneg_rows.push(Row::from_membership(expr));
    }

    /// `smat(exprs) ⪰ 0`, with one expression per `svec` coordinate of a
    /// `d × d` block (off-diagonal expressions carry the √2 weight).
    pub fn add_psd(&mut self, d: usize, exprs: Vec<AffineExpr>) {
        assert_eq!(exprs.len(), svec_len(d), "PSD block needs d(d+1)/2 rows");
        self.psd_blocks
            .push((d, exprs.into_iter().map(Row::from_membership).collect()));
    }

    pub fn build(self) -> ConicProblem {
        let n = self.num_vars;
        let mut c = vec![0.0; n];
        for (j, v) in self.objective {
            c[j] += v;
        }
        let cone = ConeSpec {
            zero_dim: self.zero_rows.len(),
            nonneg_dim: self.nonneg_rows.len(),
            psd_block_dims: self.psd_blocks.iter().map(|(d, _)| *d).collect(),
        };
        let rows = self
            .zero_rows
            .into_iter()
            .chain(self.nonneg_rows)
            .chain(self.psd_blocks.into_iter().flat_map(|(_, rows)| rows));
        let mut triplets = Vec::new();
        let mut b = Vec::new();
        for (i, row) in rows.enumerate() {
            triplets.extend(row.terms.iter().map(|&(j, v)| (i, j, v)));
            b.push(row.rhs);
        }
        ConicProblem {
            c,
            a: CsrMatrix::from_triplets(b.len(), n, &triplets),
            b,
            cone,
            variables: self.variables,
        }
    }
}
