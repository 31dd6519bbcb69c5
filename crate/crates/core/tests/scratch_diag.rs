//! Scratch diagnostic: dispersion and nearest-real distance of samples
//! from a trained checkpoint at different NFE budgets.

use flowgen::dataset_io::load_dataset;
use flowgen::harness::generate;
use flowgen::nn::load_model;
use flowgen::ode::OdeMethod;

fn per_dim_std(signals: &[Vec<f64>]) -> f64 {
    let n = signals.len() as f64;
    let d = signals[0].len();
    let mut acc = 0.0;
    for j in 0..d {
        let mean = signals.iter().map(|s| s[j]).sum::<f64>() / n;
        let var = signals.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n;
        acc += var.sqrt();
    }
    acc / d as f64
}

fn mean_norm(signals: &[Vec<f64>]) -> f64 {
    signals
        .iter()
        .map(|s| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt())
        .sum::<f64>()
        / signals.len() as f64
}

fn hf_energy(signals: &[Vec<f64>]) -> f64 {
    // mean squared first difference, proxy for high-frequency content
    signals
        .iter()
        .map(|s| {
            s.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (s.len() - 1) as f64
        })
        .sum::<f64>()
        / signals.len() as f64
}

fn nearest_real(real: &[Vec<f64>], generated: &[Vec<f64>]) -> f64 {
    generated
        .iter()
        .map(|g| {
            real.iter()
                .map(|r| {
                    r.iter()
                        .zip(g)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / generated.len() as f64
}

#[test]
fn dispersion_by_nfe() {
    let dir = std::path::Path::new("/tmp/c7/c7l");
    if !dir.exists() {
        eprintln!("skip: no /tmp/c7/c7l");
        return;
    }
    let ds = load_dataset(dir.join("dataset.fgts")).unwrap();
    let real: Vec<Vec<f64>> = ds.signals().iter().map(|s| s.data().to_vec()).collect();
    let conds: Vec<_> = (0..256).map(|i| ds.condition(i % ds.len()).clone()).collect();
    println!(
        "real       : per-dim std {:.4}  mean rms {:.4}  hf {:.5}",
        per_dim_std(&real),
        mean_norm(&real),
        hf_energy(&real)
    );
    for name in ["ddpm", "fm"] {
        let ckpt = load_model(dir.join(format!("{name}.fgmd"))).unwrap();
        for nfe in [10usize, 50, 200] {
            let out = generate(&ckpt, &conds, OdeMethod::Euler, nfe, 999, 1).unwrap();
            let sig: Vec<Vec<f64>> = out.signals().iter().map(|s| s.data().to_vec()).collect();
            println!(
                "{name:>5} @{nfe:>3}: per-dim std {:.4}  mean rms {:.4}  hf {:.5}  nearest-real {:.4}",
                per_dim_std(&sig),
                mean_norm(&sig),
                hf_energy(&sig),
                nearest_real(&real, &sig)
            );
        }
    }
}
