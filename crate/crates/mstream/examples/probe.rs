use std::time::Instant;
use mstream::trunc::{axiom_suite, category_law_suite};
fn main() {
    let t0 = Instant::now();
    let r = axiom_suite(42, 10, 4);
    println!("axioms 10@4: {:?} pass={}", t0.elapsed(), r.all_pass());
    for e in &r.entries {
        if let Some(f) = e.failures.first() { println!("  {}: seed {} {}", e.law, f.seed, f.detail); }
    }
    let t0 = Instant::now();
    let r = category_law_suite(42, 10, 4);
    println!("cats 10@4: {:?} pass={}", t0.elapsed(), r.all_pass());
    for e in &r.entries {
        if let Some(f) = e.failures.first() { println!("  {}: seed {} {}", e.law, f.seed, f.detail); }
    }
}
