//! Text formats: matrices (CSV or JSON), operators, instances and reports.
//!
//! Matrix JSON is `{"rows": n, "cols": p, "data": [row-major entries]}`.
//! Operator JSON carries a `kind` tag plus `n`, `p` and the payload of that
//! kind; mask indices are 1-based `[i, j]` pairs on the wire.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::certify::UniquenessReport;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operators::{LinearOperatorSpec, OperatorKind, ProblemInstance};
use crate::solver::SolveReport;
use crate::wcone::NonUniquenessCertificate;

pub fn matrix_to_json(m: &Matrix) -> Value {
    let data: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

pub fn matrix_from_json(v: &Value, field: &str) -> Result<Matrix> {
    let obj = v.as_object().ok_or_else(|| Error::parse(field, "expected a matrix object"))?;
    let rows = get_usize(obj, "rows", field)?;
    let cols = get_usize(obj, "cols", field)?;
    let data_field = format!("{field}.data");
    let data = obj
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(&data_field, "expected an array of numbers"))?;
    if data.len() != rows * cols {
        return Err(Error::parse(&data_field, format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    let vals = data
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::parse(&data_field, "entries must be numbers")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Matrix::from_row_slice(rows, cols, &vals))
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, field: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(field, e))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::parse(format!("{field}[row {}]", i + 1), format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::parse(field, "rows have different lengths"));
    }
    let flat: Vec<f64> = rows.concat();
    Ok(Matrix::from_row_slice(rows.len(), cols, &flat))
}

/// Parses a matrix from CSV or JSON, detected from the first character.
pub fn parse_matrix(text: &str, field: &str) -> Result<Matrix> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::parse(field, e))?;
        matrix_from_json(&v, field)
    } else {
        matrix_from_csv(text, field)
    }
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, &path.display().to_string())
}

fn get_usize(obj: &Map<String, Value>, key: &str, field: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| Error::parse(format!("{field}.{key}"), "expected a nonnegative integer"))
}

fn vector_from_json(v: Option<&Value>, field: &str) -> Result<Vector> {
    let arr = v.and_then(Value::as_array).ok_or_else(|| Error::parse(field, "expected an array of numbers"))?;
    let vals = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::parse(field, "entries must be numbers")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(vals))
}

pub fn operator_to_json(op: &LinearOperatorSpec) -> Value {
    let mut out = json!({ "kind": op.kind_name(), "n": op.n(), "p": op.p() });
    match op.kind() {
        OperatorKind::Dense { matrix } => out["matrix"] = matrix_to_json(matrix),
        OperatorKind::EntryMask { indices } => {
            out["indices"] = indices.iter().map(|&(i, j)| json!([i + 1, j + 1])).collect();
        }
        OperatorKind::LeftMul { a } => out["A"] = matrix_to_json(a),
        OperatorKind::Counterexample => {}
        OperatorKind::Stacked { parts } => out["parts"] = parts.iter().map(operator_to_json).collect(),
    }
    out
}

pub fn operator_from_json(v: &Value, field: &str) -> Result<LinearOperatorSpec> {
    let obj = v.as_object().ok_or_else(|| Error::parse(field, "expected an operator object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(format!("{field}.kind"), "missing operator kind"))?;
    if kind == "counterexample" {
        return Ok(LinearOperatorSpec::counterexample());
    }
    let n = get_usize(obj, "n", field)?;
    let p = get_usize(obj, "p", field)?;
    let payload = |key: &str| obj.get(key).ok_or_else(|| Error::parse(format!("{field}.{key}"), format!("required for kind {kind:?}")));
    let op = match kind {
        "dense" => LinearOperatorSpec::dense(n, p, matrix_from_json(payload("matrix")?, &format!("{field}.matrix"))?),
        "entry_mask" => {
            let ifield = format!("{field}.indices");
            let arr = payload("indices")?.as_array().ok_or_else(|| Error::parse(&ifield, "expected an array of [i, j] pairs"))?;
            let mut indices = Vec::with_capacity(arr.len());
            for (k, pair) in arr.iter().enumerate() {
                let ij = pair
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some((a[0].as_u64()?, a[1].as_u64()?)))
                    .ok_or_else(|| Error::parse(format!("{ifield}[{k}]"), "expected a pair of positive integers"))?;
                if ij.0 == 0 || ij.1 == 0 {
                    return Err(Error::parse(format!("{ifield}[{k}]"), "indices are 1-based"));
                }
                indices.push((ij.0 as usize - 1, ij.1 as usize - 1));
            }
            LinearOperatorSpec::entry_mask(n, p, indices)
        }
        "left_mul" => {
            let a = matrix_from_json(payload("A")?, &format!("{field}.A"))?;
            if a.ncols() != n {
                return Err(Error::parse(format!("{field}.A"), format!("expected {n} columns, found {}", a.ncols())));
            }
            LinearOperatorSpec::left_mul(p, a)
        }
        "stacked" => {
            let pfield = format!("{field}.parts");
            let arr = payload("parts")?.as_array().ok_or_else(|| Error::parse(&pfield, "expected an array of operators"))?;
            let parts = arr
                .iter()
                .enumerate()
                .map(|(k, part)| operator_from_json(part, &format!("{pfield}[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            LinearOperatorSpec::stacked(parts)
        }
        other => return Err(Error::parse(format!("{field}.kind"), format!("unknown operator kind {other:?}"))),
    };
    let op = op.map_err(|e| Error::parse(field, e))?;
    if op.n() != n || op.p() != p {
        return Err(Error::parse(field, format!("payload acts on {}x{}, declared {n}x{p}", op.n(), op.p())));
    }
    Ok(op)
}

/// Instance JSON: the operator fields plus `"b"` and an optional `"lambda"`.
pub fn instance_to_json(inst: &ProblemInstance) -> Value {
    let mut out = operator_to_json(&inst.op);
    out["b"] = inst.b.iter().copied().collect();
    if let Some(l) = inst.lambda {
        out["lambda"] = json!(l);
    }
    out
}

pub fn instance_from_json(v: &Value) -> Result<ProblemInstance> {
    let op = operator_from_json(v, "instance")?;
    let b = vector_from_json(v.get("b"), "instance.b")?;
    let lambda = match v.get("lambda") {
        None | Some(Value::Null) => None,
        Some(l) => Some(l.as_f64().ok_or_else(|| Error::parse("instance.lambda", "expected a number"))?),
    };
    ProblemInstance::new(op, b, lambda).map_err(|e| Error::parse("instance", e))
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::parse("instance", e))?;
    instance_from_json(&v)
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn solve_report_json(rep: &SolveReport) -> Value {
    json!({
        "x": matrix_to_json(&rep.x),
        "nuclear_norm": rep.nuclear_norm,
        "primal_residual": rep.primal_residual,
        "objective": rep.objective,
        "iterations": rep.iterations,
        "converged": rep.converged,
    })
}

pub fn certificate_json(cert: &NonUniquenessCertificate) -> Value {
    json!({
        "M": matrix_to_json(&cert.m),
        "R": matrix_to_json(&cert.r_block),
        "eps_hat": finite_or_null(cert.eps_hat),
        "frame": {
            "U": matrix_to_json(&cert.frame.ubar),
            "V": matrix_to_json(&cert.frame.vbar),
            "r": cert.frame.r,
        },
    })
}

pub fn uniqueness_report_json(rep: &UniquenessReport) -> Value {
    let mut out = json!({
        "verdict": rep.verdict.as_str(),
        "decided_by": rep.decided_by.as_str(),
        "gamma_star": rep.assumption.ri.gamma_star,
        "ri_status": rep.assumption.ri.status.as_str(),
        "parallel_span": rep.assumption.parallel_span,
        "parallel_rank": rep.assumption.parallel_rank,
        "optimality_residual": rep.optimality_residual,
        "feasibility_residual": rep.feasibility_residual,
        "kernel_dim": rep.kernel_dim,
        "rank": rep.rank,
        "transposed": rep.transposed,
    });
    if let Some(c) = &rep.certificate {
        out["certificate"] = certificate_json(c);
    }
    if let Some(x) = &rep.second_solution {
        out["second_solution"] = matrix_to_json(x);
    }
    if let Some(s) = &rep.search {
        out["search"] = json!({ "starts": s.starts, "best_violation": finite_or_null(s.best_violation) });
    }
    out
}

// JSON has no infinities; an unbounded step is written as null.
fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trips() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, -2.5, 0.0, 3.25, 1e-12, 7.0]);
        assert_eq!(matrix_from_json(&matrix_to_json(&m), "m").unwrap(), m);
        assert_eq!(matrix_from_csv(&matrix_to_csv(&m), "m").unwrap(), m);
        assert_eq!(parse_matrix("1, 0\n0, 1\n", "m").unwrap(), Matrix::identity(2, 2));
    }

    #[test]
    fn malformed_matrix_names_field() {
        let err = parse_matrix(r#"{"rows": 2, "cols": 2, "data": [1, 2, 3]}"#, "xbar").unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "xbar.data"), "{err}");
        let err = parse_matrix("1,2\n3\n", "xbar").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_matrix("1,x\n", "xbar").unwrap_err();
        assert!(err.to_string().contains("xbar"));
    }

    #[test]
    fn operators_round_trip() {
        let ops = vec![
            LinearOperatorSpec::counterexample(),
            LinearOperatorSpec::entry_mask(3, 2, vec![(0, 0), (2, 1)]).unwrap(),
            LinearOperatorSpec::left_mul(2, Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0])).unwrap(),
            LinearOperatorSpec::dense(2, 2, Matrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 1.0])).unwrap(),
        ];
        let stacked = LinearOperatorSpec::stacked(vec![ops[0].clone(), ops[3].clone()]).unwrap();
        for op in ops.iter().chain([&stacked]) {
            let back = operator_from_json(&operator_to_json(op), "op").unwrap();
            assert_eq!(back.kind_name(), op.kind_name());
            assert_eq!(back.matricize(), op.matricize());
        }
    }

    #[test]
    fn mask_indices_are_one_based() {
        let v = json!({"kind": "entry_mask", "n": 2, "p": 2, "indices": [[1, 1], [2, 2]], "b": [1.0, 0.0]});
        let inst = instance_from_json(&v).unwrap();
        let x = Matrix::from_row_slice(2, 2, &[1.0, 5.0, 6.0, 0.0]);
        assert_eq!(inst.op.apply(&x).unwrap().as_slice(), &[1.0, 0.0]);
        let bad = json!({"kind": "entry_mask", "n": 2, "p": 2, "indices": [[0, 1]], "b": [1.0]});
        let err = instance_from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("instance.indices[0]"), "{err}");
    }

    #[test]
    fn instance_errors_name_fields() {
        let err = parse_instance(r#"{"kind": "dense", "n": 2, "p": 2, "b": [1.0]}"#).unwrap_err();
        assert!(err.to_string().contains("instance.matrix"), "{err}");
        let err = parse_instance(r#"{"kind": "counterexample", "b": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("instance.b"), "{err}");
        let err = parse_instance(r#"{"kind": "spiral", "n": 1, "p": 1, "b": []}"#).unwrap_err();
        assert!(err.to_string().contains("instance.kind"), "{err}");
        assert!(parse_instance("{").is_err());
    }

    #[test]
    fn instance_round_trip_keeps_lambda() {
        let mut inst = ProblemInstance::counterexample();
        inst.lambda = Some(0.25);
        let back = instance_from_json(&instance_to_json(&inst)).unwrap();
        assert_eq!(back.lambda, Some(0.25));
        assert_eq!(back.b, inst.b);
    }
}
