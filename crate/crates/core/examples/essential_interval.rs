//! The essential weight interval from two boundary points of a front.
//!
//! Weights outside `[w0, wf]` only reproduce the boundary points, so the
//! bisection never looks there. The pairs below are reference boundary
//! objectives of the two case studies.

use pareto_ocp::front::essential_interval;

fn main() -> pareto_ocp::Result<()> {
    let cases = [
        ("rayleigh", [3.668, 46.50], [5.000, 44.71]),
        ("tb", [26459.0, 35205.0], [28155.0, 31133.0]),
    ];
    for (name, min_phi1, min_phi2) in cases {
        let (w0, wf) = essential_interval(min_phi1, min_phi2, [0.0, 0.0])?;
        println!("{name:>8}: [{w0:.4}, {wf:.4}]");
    }
    Ok(())
}
