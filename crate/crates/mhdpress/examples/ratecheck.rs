use mhdpress::verify::{builtin_cases, convergence_study, SolverId};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let levels: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    let case = &builtin_cases()[0];
    for degree in [2usize, 1] {
        for solver in [SolverId::Stokes, SolverId::Elliptic, SolverId::Linearized] {
            let t0 = Instant::now();
            let table = convergence_study(case, solver, degree, levels, 2).unwrap();
            println!(
                "== {:?} degree {degree} ({:.1?})",
                solver,
                t0.elapsed()
            );
            for row in &table.rows {
                println!(
                    "  level {} h={:.3} dofs={} errors={:?}",
                    row.level, row.h, row.dofs, row.errors
                );
            }
            for (norm, r) in &table.ratios {
                println!("  ratios {norm}: {r:?}");
            }
        }
    }
}
