// Scratch: end-to-end quality at several SNRs with the final loop.
use akcca::alternating::{run_akcca, AkccaConfig};
use akcca::equalizer::{aligned_mse, ber, equalize, EqualizerMethod};
use akcca::signals::{generate_source, simulate, Nonlinearity, NoiseSpec, SourceKind, WienerSimoSystem};

fn main() {
    for p in [2usize, 3, 4, 5] {
        let (snr, kind) = (15.0f64, SourceKind::Binary);
        let noise = if snr.is_finite() { NoiseSpec::SnrDb(snr) } else { NoiseSpec::None };
        let ids: Vec<usize> = (1..=p).collect();
        let sys = WienerSimoSystem::from_bench(
            &ids,
            &vec![Nonlinearity::SmoothSaturation; p],
            noise,
        )
        .unwrap();
        let mut mses = vec![];
        let mut bers = vec![];
        let mut iters = vec![];
        let mut nconv = 0;
        for seed in 0..100u64 {
            let src = generate_source(kind, 256, seed).unwrap();
            let out = simulate(&sys, &src, seed ^ 0xdead).unwrap();
            let est = run_akcca(&out.observed, &AkccaConfig::new(5)).unwrap();
            let eq = equalize(&est.channels, &est.intermediates, EqualizerMethod::Zf, None).unwrap();
            let mse = aligned_mse(&src.samples[4..], &eq.s_hat).unwrap();
            mses.push(mse);
            if kind == SourceKind::Binary {
                bers.push(ber(&src.samples[4..], &eq.s_hat).unwrap());
            }
            iters.push(est.iterations);
            if est.converged { nconv += 1; }
        }
        let mean_mse = mses.iter().sum::<f64>() / mses.len() as f64;
        let mean_ber = if bers.is_empty() { f64::NAN } else { bers.iter().sum::<f64>() / bers.len() as f64 };
        let nz = bers.iter().filter(|&&b| b > 0.0).count();
        let maxber = bers.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "nonzero_ber_runs={nz} max_ber={maxber:.3} P={p} snr={snr:>5} {kind:?}: mean_mse={mean_mse:.3e} ({:.1} dB) mean_ber={mean_ber:.3e} conv={nconv}/100 max_it={}",
            10.0 * mean_mse.log10(),
            iters.iter().max().unwrap()
        );
    }
}
