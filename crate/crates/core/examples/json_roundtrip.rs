//! Instance and report JSON as read and written by the command-line tool.

use nucnorm::certify::{self, CertifyConfig};
use nucnorm::io;
use nucnorm::{LinearOperatorSpec, Matrix, ProblemInstance};

fn main() {
    let op = LinearOperatorSpec::stacked(vec![
        LinearOperatorSpec::entry_mask(2, 2, vec![(0, 0), (1, 1)]).unwrap(),
        LinearOperatorSpec::left_mul(2, Matrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap(),
    ])
    .unwrap();
    let x = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let inst = ProblemInstance::new(op.clone(), op.apply(&x).unwrap(), None).unwrap();
    let text = serde_json::to_string_pretty(&io::instance_to_json(&inst)).unwrap();
    println!("instance:\n{text}");

    let back = io::parse_instance(&text).unwrap();
    assert_eq!(back.op.matricize(), inst.op.matricize());

    let rep = certify::certify_uniqueness(&back.op, &back.b, &x, &CertifyConfig::default()).unwrap();
    println!("\nreport:\n{}", serde_json::to_string_pretty(&io::uniqueness_report_json(&rep)).unwrap());

    match io::parse_instance(r#"{"kind": "entry_mask", "n": 2, "p": 2, "indices": [[0, 1]], "b": [1]}"#) {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("\nmalformed input: {e}"),
    }
}
