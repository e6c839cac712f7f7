// Runs the numerical self-check suite and shows that a sign error planted
// in one backward rule is caught.

use ttea::autodiff::OpKind;
use ttea::selfcheck::{fault_detected, run, SelfCheckOptions};

pub fn run_example() -> ttea::Result<bool> {
    let report = run(&SelfCheckOptions {
        instances: 5,
        ..SelfCheckOptions::default()
    });
    print!("{}", report.to_text());
    let caught = fault_detected(OpKind::SegmentSoftmax, 3);
    println!("planted sign flip in SegmentSoftmax detected: {caught}");
    Ok(report.passed() && caught)
}

#[allow(dead_code)]
fn main() {
    match run_example() {
        Ok(true) => {}
        Ok(false) => std::process::exit(3),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
