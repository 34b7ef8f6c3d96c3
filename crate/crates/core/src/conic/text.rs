//! Plain-text cone-program format, version 1.
//!
//! Newline-delimited records; blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! coneprog 1                      header, must come first
//! vars <n>                        number of variables
//! rows <p>                        number of equality rows
//! obj <i> <value>                 objective coefficient (omitted entries are 0)
//! a <row> <col> <value>           equality matrix triplet (duplicates are summed)
//! b <row> <value>                 right-hand side (omitted entries are 0)
//! cone <kind> <dim> <i_1> .. <i_dim>
//!                                 kind is one of nonneg, quad, rquad
//! free <i_1> .. <i_k>             free variables (may repeat, may be absent)
//! end                             terminator, required
//! ```
//!
//! Reals are written with 17 significant digits.

use super::{Cone, ConeKind, ConeProgram, ConicError, SparseMatrix};
use std::fmt::Write as _;

pub const FORMAT_VERSION: u32 = 1;

/// Largest accepted `vars` or `rows` declaration.
pub const MAX_DIMENSION: usize = 1 << 22;

fn kind_name(kind: ConeKind) -> &'static str {
    match kind {
        ConeKind::NonnegOrthant => "nonneg",
        ConeKind::Quadratic => "quad",
        ConeKind::RotatedQuadratic => "rquad",
    }
}

pub fn write_program(p: &ConeProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "coneprog {FORMAT_VERSION}");
    let _ = writeln!(out, "vars {}", p.num_vars);
    let _ = writeln!(out, "rows {}", p.num_rows());
    for (i, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(out, "obj {i} {c:.16e}");
        }
    }
    for &(r, c, v) in &p.eq_a.entries {
        let _ = writeln!(out, "a {r} {c} {v:.16e}");
    }
    for (r, &v) in p.eq_b.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "b {r} {v:.16e}");
        }
    }
    for cone in &p.cones {
        let _ = write!(out, "cone {} {}", kind_name(cone.kind), cone.dim());
        for i in &cone.var_indices {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    if !p.free_vars.is_empty() {
        out.push_str("free");
        for i in &p.free_vars {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

struct Cursor<'a> {
    line: usize,
    fields: std::str::SplitWhitespace<'a>,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> ConicError {
        ConicError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_str(&mut self, what: &str) -> Result<&'a str, ConicError> {
        self.fields.next().ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn usize(&mut self, what: &str) -> Result<usize, ConicError> {
        let s = self.next_str(what)?;
        s.parse().map_err(|_| self.err(format!("invalid {what} '{s}'")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ConicError> {
        let s = self.next_str(what)?;
        let v: f64 = s.parse().map_err(|_| self.err(format!("invalid {what} '{s}'")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn done(&mut self) -> Result<(), ConicError> {
        match self.fields.next() {
            Some(extra) => Err(self.err(format!("unexpected trailing field '{extra}'"))),
            None => Ok(()),
        }
    }
}

/// Parses a program and checks its structural invariants.
pub fn parse_program(text: &str) -> Result<ConeProgram, ConicError> {
    let mut num_vars: Option<usize> = None;
    let mut num_rows: Option<usize> = None;
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs: Vec<(usize, f64)> = Vec::new();
    let mut cones = Vec::new();
    let mut free = Vec::new();
    let mut seen_header = false;
    let mut ended = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cur = Cursor {
            line,
            fields: trimmed.split_whitespace(),
        };
        if ended {
            return Err(cur.err("content after 'end'"));
        }
        let key = cur.next_str("record")?;
        if !seen_header {
            if key != "coneprog" {
                return Err(cur.err("expected 'coneprog <version>' header"));
            }
            let v = cur.usize("version")?;
            if v != FORMAT_VERSION as usize {
                return Err(cur.err(format!("unsupported version {v}")));
            }
            cur.done()?;
            seen_header = true;
            continue;
        }
        let n_limit = |cur: &Cursor, i: usize, n: Option<usize>, what: &str| -> Result<(), ConicError> {
            match n {
                None => Err(cur.err(format!("'{what}' before its size declaration"))),
                Some(n) if i >= n => Err(cur.err(format!("{what} index {i} out of range"))),
                _ => Ok(()),
            }
        };
        match key {
            "vars" | "rows" => {
                let v = cur.usize(key)?;
                if v > MAX_DIMENSION {
                    return Err(cur.err(format!("'{key}' {v} exceeds the limit of {MAX_DIMENSION}")));
                }
                let slot = if key == "vars" { &mut num_vars } else { &mut num_rows };
                if slot.replace(v).is_some() {
                    return Err(cur.err(format!("duplicate '{key}'")));
                }
            }
            "obj" => {
                let i = cur.usize("variable")?;
                n_limit(&cur, i, num_vars, "obj")?;
                objective.push((i, cur.f64("value")?));
            }
            "a" => {
                let r = cur.usize("row")?;
                let c = cur.usize("column")?;
                n_limit(&cur, r, num_rows, "a row")?;
                n_limit(&cur, c, num_vars, "a column")?;
                triplets.push((r, c, cur.f64("value")?));
            }
            "b" => {
                let r = cur.usize("row")?;
                n_limit(&cur, r, num_rows, "b")?;
                rhs.push((r, cur.f64("value")?));
            }
            "cone" => {
                let kind = match cur.next_str("cone kind")? {
                    "nonneg" => ConeKind::NonnegOrthant,
                    "quad" => ConeKind::Quadratic,
                    "rquad" => ConeKind::RotatedQuadratic,
                    other => return Err(cur.err(format!("unknown cone kind '{other}'"))),
                };
                let dim = cur.usize("cone dimension")?;
                let mut idx = Vec::with_capacity(dim.min(1 << 16));
                for _ in 0..dim {
                    let i = cur.usize("cone index")?;
                    n_limit(&cur, i, num_vars, "cone")?;
                    idx.push(i);
                }
                cones.push(Cone::new(kind, idx));
            }
            "free" => {
                for s in cur.fields.by_ref() {
                    let i: usize = s.parse().map_err(|_| ConicError::Parse {
                        line,
                        message: format!("invalid free index '{s}'"),
                    })?;
                    free.push(i);
                }
                if let Some(&i) = free.iter().find(|&&i| num_vars.is_none_or(|n| i >= n)) {
                    return Err(cur.err(format!("free index {i} out of range")));
                }
            }
            "end" => ended = true,
            other => return Err(cur.err(format!("unknown record '{other}'"))),
        }
        cur.done()?;
    }

    if !seen_header {
        return Err(ConicError::Parse {
            line: last_line.max(1),
            message: "missing 'coneprog' header".into(),
        });
    }
    if !ended {
        return Err(ConicError::Parse {
            line: last_line,
            message: "missing 'end'".into(),
        });
    }
    let n = num_vars.ok_or_else(|| ConicError::Parse {
        line: last_line,
        message: "missing 'vars'".into(),
    })?;
    let p = num_rows.unwrap_or(0);

    let mut obj = vec![0.0; n];
    for (i, v) in objective {
        obj[i] += v;
    }
    let mut eq_b = vec![0.0; p];
    for (r, v) in rhs {
        eq_b[r] += v;
    }
    let program = ConeProgram {
        num_vars: n,
        objective: obj,
        eq_a: SparseMatrix {
            rows: p,
            cols: n,
            entries: triplets,
        },
        eq_b,
        cones,
        free_vars: free,
    };
    program.validate()?;
    Ok(program)
}
