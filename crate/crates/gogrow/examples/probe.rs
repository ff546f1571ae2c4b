//! Scratch measurement harness used while calibrating test tolerances.
//! Not part of the library surface; run as
//! `cargo run --release --example probe -- <cmd> <args...>`.

use gogrow::core::{build_grid, Frame, ModelParams, State};
use gogrow::kinetic::{kinetic_spreading_state, kinetic_step, kinetic_wave_state, run_kinetic};
use gogrow::pde::{
    interface_position, run_static, spreading_initial_data, step_moving, SchemeConfig,
};
use gogrow::speedlab::{estimate_speed, trajectory_pairs};
use gogrow::waves::{kinetic_minimal_speed, minimal_speed, parabolic_wave_state};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cmd = args.first().map(String::as_str).unwrap_or("help");
    let f = |i: usize| -> f64 { args[i].parse().unwrap() };
    match cmd {
        // stationarity <dz> <dt> <t_end> <theta>: criterion-2 quantity on [-50,150]
        "stationarity" => stationarity(f(1), f(2), f(3), f(4)),
        // spreading <chi> <dz> <t_end> [dt_over_dz] [theta]
        "spreading" => spreading(
            f(1),
            f(2),
            f(3),
            args.get(4).map(|s| s.parse().unwrap()),
            args.get(5).map(|s| s.parse().unwrap()),
        ),
        // movingwave <dz> <dt> <t_end>
        "movingwave" => movingwave(f(1), f(2), f(3)),
        // kinwave <eps> <dz> <t_end>
        "kinwave" => kinwave(f(1), f(2), f(3)),
        // kinspeed <chi> <eps> <dz> <t_end>
        "kinspeed" => kinspeed(f(1), f(2), f(3), f(4)),
        other => eprintln!("unknown probe {other}"),
    }
}

fn stationarity(dz: f64, dt: f64, t_end: f64, theta: f64) {
    let p = ModelParams::new(2.0, 1.0, 0.5, 0.25).unwrap();
    let n_cells = (200.0 / dz).round() as usize;
    let g = build_grid(-50.0, 150.0, n_cells).unwrap();
    let (s0, wp, _) = parabolic_wave_state(&p, 2.5, g).unwrap();
    let cfg = SchemeConfig::new(dt, theta).unwrap();
    let run = run_static(s0, &p, &cfg, t_end, 100, &[]).unwrap();
    let s = &run.final_state;
    let xbar = interface_position(&s.nutrient, p.n_threshold).unwrap();
    let mut dev: f64 = 0.0;
    let mut zworst = 0.0;
    for (i, z) in g.centers().enumerate() {
        if z - xbar < -40.0 || z - xbar > 40.0 {
            continue;
        }
        let d = (s.rho.values[i] - wp.value(z - xbar)).abs();
        if d > dev {
            dev = d;
            zworst = z - xbar;
        }
    }
    let speed = (xbar - 0.0) / t_end;
    println!(
        "stationarity dz={dz} dt={dt} t={t_end}: dev={dev:.6} at z-xbar={zworst:.3} xbar={xbar:.4} mean_speed={speed:.5}"
    );
    for (i, z) in g.centers().enumerate() {
        let rel = z - xbar;
        if (-0.6..0.6).contains(&rel) {
            println!(
                "    z-xbar={rel:+.4} rho={:.5} exact={:.5} diff={:+.5}",
                s.rho.values[i],
                wp.value(rel),
                s.rho.values[i] - wp.value(rel)
            );
        }
    }
}

fn spreading(chi: f64, dz: f64, t_end: f64, dt_over_dz: Option<f64>, theta: Option<f64>) {
    let p = ModelParams::new(chi, 1.0, 0.5, 0.25).unwrap();
    let star = minimal_speed(chi).unwrap();
    let z_max = star * t_end + 40.0;
    let n_cells = ((z_max + 20.0) / dz).round() as usize;
    let g = build_grid(-20.0, z_max, n_cells).unwrap();
    let (rho, n) = spreading_initial_data(&p, g, 1.0);
    let s0 = State::new(rho, n, 0.0, Frame::Static).unwrap();
    let dt = dt_over_dz.unwrap_or((0.8 / chi).min(0.4)) * dz;
    let cfg = SchemeConfig::new(dt, theta.unwrap_or(1.0)).unwrap();
    let stride = ((0.2 / dt).round() as usize).max(1);
    let run = run_static(s0, &p, &cfg, t_end, stride, &[]).unwrap();
    let pairs = trajectory_pairs(&run.trajectory);
    let est = estimate_speed(&pairs, 0.5).unwrap();
    println!(
        "spreading chi={chi} dz={dz} dt={dt} T={t_end}: slope={:.5} rel={:+.4}% window=({:.1},{:.1}) min={:.4} max={:.4} rms={:.2e}",
        est.slope,
        100.0 * (est.slope - star) / star,
        est.window.0,
        est.window.1,
        est.min_slope,
        est.max_slope,
        est.rms_residual
    );
}

fn movingwave(dz: f64, dt: f64, t_end: f64) {
    let p = ModelParams::new(2.0, 1.0, 0.5, 0.25).unwrap();
    let n_cells = (60.0 / dz).round() as usize;
    let g = build_grid(-30.0, 30.0, n_cells).unwrap();
    let (s0, wp, _) = parabolic_wave_state(&p, 2.5, g).unwrap();
    let rho0 = s0.rho.clone();
    let mut s =
        State::new(s0.rho.clone(), s0.nutrient.clone(), 0.0, Frame::Moving { xbar: 0.0, xdot: 2.5 })
            .unwrap();
    let cfg = SchemeConfig::new(dt, 0.5).unwrap();
    let steps = (t_end / dt).round() as usize;
    let mut worst_t = 0.0;
    let mut gap: f64 = 0.0;
    for k in 0..steps {
        s = step_moving(&s, &p, 2.5, &cfg).unwrap();
        if (k + 1) % (steps / 10).max(1) == 0 {
            let mut tgap: f64 = 0.0;
            for (i, z) in g.centers().enumerate() {
                if (-20.0..20.0).contains(&z) {
                    tgap = tgap.max((s.rho.values[i] - rho0.values[i]).abs());
                }
            }
            if tgap > gap {
                gap = tgap;
                worst_t = s.time;
            }
            println!("  t={:.2} pinned-frame gap={tgap:.5}", s.time);
        }
    }
    let _ = (wp, worst_t);
    println!("movingwave dz={dz} dt={dt} t={t_end}: max gap={gap:.5} ({:.2} dz)", gap / dz);
}

fn kinwave(eps: f64, dz: f64, t_end: f64) {
    let p = ModelParams::new(2.0, 1.0, 0.5, eps).unwrap();
    let sigma = kinetic_minimal_speed(2.0, eps).unwrap();
    let n_cells = (80.0 / dz).round() as usize;
    let g = build_grid(-25.0, 55.0, n_cells).unwrap();
    let (ks0, kwp, _) = kinetic_wave_state(&p, sigma, g).unwrap();
    let cfg = SchemeConfig::new(eps * dz, 0.5).unwrap();
    let steps = (t_end / cfg.dt).round() as usize;
    let mut ks = ks0;
    for _ in 0..steps {
        ks = kinetic_step(&ks, &p, &cfg).unwrap();
    }
    // recenter at the measured nutrient interface instead of sigma*t
    let xbar = interface_position(&ks.nutrient, p.n_threshold).unwrap();
    let mut gap_meas: f64 = 0.0;
    let mut gap_exact: f64 = 0.0;
    for (i, z) in g.centers().enumerate() {
        if !(-15.0..15.0).contains(&z) {
            continue;
        }
        let [fp, fm] = kwp.pair(z - xbar);
        gap_meas = gap_meas.max((ks.f_plus.values[i] - fp).abs());
        gap_meas = gap_meas.max((ks.f_minus.values[i] - fm).abs());
        let [fp2, fm2] = kwp.pair(z - sigma * ks.time);
        gap_exact = gap_exact.max((ks.f_plus.values[i] - fp2).abs());
        gap_exact = gap_exact.max((ks.f_minus.values[i] - fm2).abs());
    }
    println!(
        "kinwave eps={eps} dz={dz} t={t_end}: xbar={xbar:.4} (exact {:.4}) gap@meas={gap_meas:.5} gap@exact={gap_exact:.5}",
        sigma * ks.time
    );
    for (i, z) in g.centers().enumerate() {
        let rel = z - xbar;
        if (-1.0..1.5).contains(&rel) && i % 4 == 0 {
            let [fp, fm] = kwp.pair(rel);
            println!(
                "    rel={rel:+.3} f+={:.5} exact={fp:.5} d+={:+.5} | f-={:.5} exact={fm:.5} d-={:+.5}",
                ks.f_plus.values[i],
                ks.f_plus.values[i] - fp,
                ks.f_minus.values[i],
                ks.f_minus.values[i] - fm
            );
        }
    }
}

fn kinspeed(chi: f64, eps: f64, dz: f64, t_end: f64) {
    let p = ModelParams::new(chi, 1.0, 0.5, eps).unwrap();
    let star = kinetic_minimal_speed(chi, eps).unwrap();
    let z_max = star * t_end + 40.0;
    let n_cells = ((z_max + 20.0) / dz).round() as usize;
    let g = build_grid(-20.0, z_max, n_cells).unwrap();
    let ks = kinetic_spreading_state(&p, g).unwrap();
    let cfg = SchemeConfig::new(eps * g.dz, 1.0).unwrap();
    let stride = ((0.2 / cfg.dt).round() as usize).max(1);
    let run = run_kinetic(ks, &p, &cfg, t_end, stride).unwrap();
    let pairs = trajectory_pairs(&run.trajectory);
    let est = estimate_speed(&pairs, 0.5).unwrap();
    println!(
        "kinspeed chi={chi} eps={eps} dz={dz} T={t_end}: slope={:.5} rel={:+.4}% (star={star:.5}) min={:.4} max={:.4}",
        est.slope,
        100.0 * (est.slope - star) / star,
        est.min_slope,
        est.max_slope
    );
}
