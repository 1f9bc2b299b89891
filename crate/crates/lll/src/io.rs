//! Text formats: DIMACS CNF, the hypergraph format, x-weight files, sample
//! tables and execution-log export.

use std::fmt::Write as _;

use thiserror::Error;

use crate::apps::{CnfFormula, Hypergraph, Lit};
use crate::sample::SampleTable;
use crate::sequential::ExecutionLog;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, msg: msg.into() }
}

/// DIMACS CNF: `c` comments, a `p cnf <vars> <clauses>` header, then one
/// zero-terminated clause per line.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(lineno, "duplicate header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(err(lineno, format!("malformed header '{line}'")));
            }
            let n: usize =
                fields[2].parse().map_err(|_| err(lineno, "bad variable count"))?;
            let m: usize =
                fields[3].parse().map_err(|_| err(lineno, "bad clause count"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| err(lineno, "clause before header"))?;
        let mut lits = Vec::new();
        let mut terminated = false;
        for tok in line.split_whitespace() {
            if terminated {
                return Err(err(lineno, "tokens after terminating 0"));
            }
            let v: i64 = tok
                .parse()
                .map_err(|_| err(lineno, format!("bad literal '{tok}'")))?;
            if v == 0 {
                terminated = true;
                continue;
            }
            let var = v.unsigned_abs() as usize - 1;
            if var >= n {
                return Err(err(lineno, format!("literal {v} out of range 1..={n}")));
            }
            let lit = Lit { var, positive: v > 0 };
            if lits.iter().any(|l: &Lit| l.var == var) {
                return Err(err(
                    lineno,
                    format!("variable {} repeated within a clause", var + 1),
                ));
            }
            lits.push(lit);
        }
        if !terminated {
            return Err(err(lineno, "clause line not terminated by 0"));
        }
        if lits.is_empty() {
            return Err(err(lineno, "empty clause"));
        }
        clauses.push(lits);
    }
    let (n, m) = header.ok_or_else(|| err(text.lines().count() + 1, "missing header"))?;
    if clauses.len() != m {
        return Err(err(
            text.lines().count() + 1,
            format!("header promises {m} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(n, clauses)
        .map_err(|e| err(0, e.to_string()))
}

pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", formula.num_vars, formula.clauses.len());
    for clause in &formula.clauses {
        for lit in clause {
            let v = lit.var as i64 + 1;
            let _ = write!(out, "{} ", if lit.positive { v } else { -v });
        }
        let _ = writeln!(out, "0");
    }
    out
}

/// Hypergraph format: header `h <vertices> <edges>`, then one edge per line
/// as 1-based vertex ids.
pub fn parse_hypergraph(text: &str) -> Result<Hypergraph, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges: Vec<Vec<usize>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('h') {
            if header.is_some() {
                return Err(err(lineno, "duplicate header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 || fields[0] != "h" {
                return Err(err(lineno, format!("malformed header '{line}'")));
            }
            let v: usize =
                fields[1].parse().map_err(|_| err(lineno, "bad vertex count"))?;
            let e: usize = fields[2].parse().map_err(|_| err(lineno, "bad edge count"))?;
            header = Some((v, e));
            continue;
        }
        let (nv, _) = header.ok_or_else(|| err(lineno, "edge before header"))?;
        let mut edge = Vec::new();
        for tok in line.split_whitespace() {
            let v: usize = tok
                .parse()
                .map_err(|_| err(lineno, format!("bad vertex id '{tok}'")))?;
            if v == 0 || v > nv {
                return Err(err(lineno, format!("vertex {v} out of range 1..={nv}")));
            }
            if edge.contains(&(v - 1)) {
                return Err(err(lineno, format!("vertex {v} repeated within an edge")));
            }
            edge.push(v - 1);
        }
        if edge.len() < 2 {
            return Err(err(lineno, "edge needs at least 2 vertices"));
        }
        edges.push(edge);
    }
    let (nv, ne) = header.ok_or_else(|| err(text.lines().count() + 1, "missing header"))?;
    if edges.len() != ne {
        return Err(err(
            text.lines().count() + 1,
            format!("header promises {ne} edges, found {}", edges.len()),
        ));
    }
    Hypergraph::new(nv, edges).map_err(|e| err(0, e.to_string()))
}

pub fn emit_hypergraph(hg: &Hypergraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "h {} {}", hg.num_vertices, hg.edges.len());
    for edge in &hg.edges {
        let ids: Vec<String> = edge.iter().map(|&v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(" "));
    }
    out
}

/// One real per event, whitespace separated.
pub fn parse_x_file(text: &str) -> Result<Vec<f64>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        for tok in raw.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(i + 1, format!("bad weight '{tok}'")))?;
            out.push(v);
        }
    }
    Ok(out)
}

/// One variable per line, whitespace-separated value indices.
pub fn emit_sample_table(table: &SampleTable) -> String {
    let mut out = String::new();
    for row in table.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

pub fn parse_sample_table(text: &str) -> Result<SampleTable, ParseError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let row: Result<Vec<usize>, _> = raw
            .split_whitespace()
            .map(|tok| tok.parse::<usize>().map_err(|_| err(i + 1, format!("bad value '{tok}'"))))
            .collect();
        rows.push(row?);
    }
    Ok(SampleTable::new(rows))
}

/// One event id per line, with `#round k` markers when round bounds exist.
pub fn emit_log(log: &ExecutionLog) -> String {
    let mut out = String::new();
    match &log.round_bounds {
        Some(bounds) => {
            for (k, seg) in bounds.iter().enumerate() {
                let _ = writeln!(out, "#round {k}");
                for t in seg.clone() {
                    let _ = writeln!(out, "{}", log.steps[t]);
                }
            }
        }
        None => {
            for &e in &log.steps {
                let _ = writeln!(out, "{e}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_minimal() {
        let f = parse_dimacs("p cnf 2 1\n1 2 0\n").unwrap();
        assert_eq!(f.num_vars, 2);
        assert_eq!(f.clauses.len(), 1);
        assert_eq!(f.clauses[0], vec![Lit { var: 0, positive: true }, Lit { var: 1, positive: true }]);
    }

    #[test]
    fn dimacs_rejects_tautological_clause() {
        let e = parse_dimacs("p cnf 2 1\n1 -1 0\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn dimacs_rejects_malformed() {
        assert!(parse_dimacs("p cnf x 1\n1 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 2 0\n").is_err()); // count mismatch
        assert!(parse_dimacs("p cnf 1 1\n2 0\n").is_err()); // out of range
        assert!(parse_dimacs("1 0\n").is_err()); // clause before header
        assert!(parse_dimacs("p cnf 1 1\n1\n").is_err()); // missing terminator
    }

    #[test]
    fn dimacs_comments_and_negatives() {
        let f = parse_dimacs("c a comment\np cnf 3 2\n-1 2 0\nc mid comment\n3 -2 0\n").unwrap();
        assert_eq!(f.clauses[0][0], Lit { var: 0, positive: false });
        assert_eq!(f.clauses[1][1], Lit { var: 1, positive: false });
    }

    #[test]
    fn dimacs_round_trip() {
        let f = parse_dimacs("p cnf 4 3\n1 -2 0\n-3 4 0\n2 3 -4 0\n").unwrap();
        let again = parse_dimacs(&emit_dimacs(&f)).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn hypergraph_minimal_and_rejects() {
        let hg = parse_hypergraph("h 3 1\n1 2 3\n").unwrap();
        assert_eq!(hg.edges, vec![vec![0, 1, 2]]);
        assert!(parse_hypergraph("h 3 1\n1 1 2\n").is_err());
        assert!(parse_hypergraph("h 3 1\n1 4 0\n").is_err());
        assert!(parse_hypergraph("h 3 2\n1 2\n").is_err());
    }

    #[test]
    fn hypergraph_round_trip() {
        let hg = parse_hypergraph("h 5 2\n1 2 3\n3 4 5\n").unwrap();
        assert_eq!(parse_hypergraph(&emit_hypergraph(&hg)).unwrap(), hg);
    }

    #[test]
    fn x_file_parses() {
        assert_eq!(parse_x_file("0.5\n0.25 0.125\n").unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(parse_x_file("0.5\nabc\n").is_err());
    }

    #[test]
    fn sample_table_round_trip() {
        let t = SampleTable::new(vec![vec![0, 1, 1], vec![1, 0, 0]]);
        assert_eq!(parse_sample_table(&emit_sample_table(&t)).unwrap(), t);
    }

    #[test]
    fn log_export_with_rounds() {
        let mut log = ExecutionLog::new(3);
        log.push(2);
        log.push(0);
        log.push(1);
        log.round_bounds = Some(vec![0..2, 2..3]);
        assert_eq!(emit_log(&log), "#round 0\n2\n0\n#round 1\n1\n");
        log.round_bounds = None;
        assert_eq!(emit_log(&log), "2\n0\n1\n");
    }
}
