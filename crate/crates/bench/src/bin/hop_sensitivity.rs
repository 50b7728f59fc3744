//! Sweeps the per-particle hop latency and prints graph-mode update rates.
//!
//! Usage: hop_sensitivity [DUR_MS]

use evtrack_bench::{hop_sweep, orbit_stream};

const HOPS: [f64; 6] = [0.0, 1.0, 2.3, 4.6, 9.2, 18.4];
const N_VALUES: [usize; 4] = [50, 100, 200, 400];

fn main() {
    let dur_ms = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("DUR_MS must be an integer"))
        .unwrap_or(300);
    let events = orbit_stream(dur_ms, 600.0, 0);
    let rows = hop_sweep(&HOPS, &N_VALUES, &events).expect("sweep");
    println!("t_particle_hop,n,rate_hz,period_us");
    for r in rows {
        println!(
            "{},{},{:.3},{:.3}",
            r.t_particle_hop, r.n, r.rate_hz, r.period_us
        );
    }
}
