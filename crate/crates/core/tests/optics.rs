use sivplant::analysis::{detect_spots, fit_g2, G2Options, SpotOptions};
use sivplant::optics::{
    expected_counts, simulate_hbt, synthesize_confocal_map, Emitter, EmitterField, EmitterOrigin, HbtConfig,
    OpticsConfig, Region,
};

fn emitter(x_um: f64, y_um: f64, brightness_cps: f64) -> Emitter {
    Emitter { x_um, y_um, depth_nm: 1000.0, brightness_cps, origin: EmitterOrigin::Direct }
}

fn field(emitters: Vec<Emitter>) -> EmitterField {
    EmitterField { emitters }
}

#[test]
fn expectation_is_linear_in_emitters() {
    let optics = OpticsConfig { background_cps: 0.0, ..OpticsConfig::default() };
    let region = Region::new(0.0, 0.0, 6.0, 6.0).unwrap();
    let a = field(vec![emitter(2.0, 2.0, 2700.0), emitter(2.3, 4.1, 1500.0)]);
    let b = field(vec![emitter(4.5, 3.0, 4000.0)]);
    let union = field(a.emitters.iter().chain(&b.emitters).copied().collect());
    let ea = expected_counts(&a, &optics, &region).unwrap();
    let eb = expected_counts(&b, &optics, &region).unwrap();
    let eu = expected_counts(&union, &optics, &region).unwrap();
    for ((x, y), u) in ea.iter().zip(&eb).zip(&eu) {
        assert!((x + y - u).abs() <= 1e-9 * u.max(1.0));
    }
}

#[test]
fn peak_pixel_and_total_expectation() {
    let optics = OpticsConfig { background_cps: 200.0, ..OpticsConfig::default() };
    let region = Region::new(0.0, 0.0, 8.0, 8.0).unwrap();
    // emitter on a pixel center
    let f = field(vec![emitter(4.05, 4.05, 2700.0)]);
    let e = expected_counts(&f, &optics, &region).unwrap();
    let dwell = optics.dwell_ms * 1e-3;
    let bg = 200.0 * dwell;
    let peak = e.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!((peak - bg - 2700.0 * dwell).abs() < 1e-9);

    let pixel_area = (optics.pixel_size_nm * 1e-3).powi(2);
    let total: f64 = e.iter().sum();
    let expected = 2700.0 * dwell * optics.psf_area_um2() / pixel_area + bg * e.len() as f64;
    assert!((total / expected - 1.0).abs() < 1e-3, "{total} vs {expected}");
}

#[test]
fn single_emitter_width_is_the_psf() {
    let optics = OpticsConfig { dwell_ms: 1000.0, ..OpticsConfig::default() };
    let region = Region::new(0.0, 0.0, 6.0, 6.0).unwrap();
    let map = synthesize_confocal_map(&field(vec![emitter(3.02, 2.97, 2700.0)]), &optics, &region, 4).unwrap();
    let det = detect_spots(&map, &SpotOptions::default()).unwrap();
    assert_eq!(det.spots.len(), 1);
    let fwhm = det.spots[0].fwhm_nm.unwrap();
    assert!((fwhm / optics.psf_fwhm_nm() - 1.0).abs() < 0.05, "{fwhm}");
    assert!(!det.spots[0].larger_than_psf);
}

#[test]
fn background_noise_is_poisson_and_seeds_independent() {
    let optics = OpticsConfig { background_cps: 1000.0, ..OpticsConfig::default() };
    let region = Region::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let empty = field(Vec::new());
    let a = synthesize_confocal_map(&empty, &optics, &region, 1).unwrap();
    let b = synthesize_confocal_map(&empty, &optics, &region, 2).unwrap();
    let n = a.counts.len() as f64;
    let mean = a.counts.iter().map(|c| *c as f64).sum::<f64>() / n;
    let chi2: f64 = a.counts.iter().map(|c| (*c as f64 - 10.0).powi(2) / 10.0).sum();
    // χ² with n dof: mean n, sd sqrt(2n)
    assert!((chi2 - n).abs() < 4.0 * (2.0 * n).sqrt(), "chi2 {chi2} over {n} pixels");
    assert!((mean - 10.0).abs() < 4.0 * (10.0 / n).sqrt());

    let mb = b.counts.iter().map(|c| *c as f64).sum::<f64>() / n;
    let cov: f64 = a.counts.iter().zip(&b.counts).map(|(x, y)| (*x as f64 - mean) * (*y as f64 - mb)).sum::<f64>() / n;
    let r = cov / 10.0;
    assert!(r.abs() < 4.0 / n.sqrt(), "cross-seed correlation {r}");
    assert_ne!(a.counts, b.counts);
}

#[test]
fn empty_field_without_background_is_dark() {
    let region = Region::new(0.0, 0.0, 3.0, 3.0).unwrap();
    let map = synthesize_confocal_map(&field(Vec::new()), &OpticsConfig::default(), &region, 9).unwrap();
    assert!(map.counts.iter().all(|c| *c == 0));
}

#[test]
fn antibunching_depth_follows_emitter_number() {
    let config = HbtConfig { acquisition_s: 10.0, ..HbtConfig::default() };
    let mut means = Vec::new();
    for n in 1..=4usize {
        let g0: Vec<f64> = (0..3)
            .map(|s| {
                let h = simulate_hbt(n, &config, 1000 + 10 * n as u64 + s).unwrap();
                fit_g2(&h, &G2Options::default()).unwrap().g2_zero
            })
            .collect();
        let mean = g0.iter().sum::<f64>() / g0.len() as f64;
        let law = 1.0 - 1.0 / n as f64;
        assert!((mean - law).abs() < 0.1, "N={n}: {mean} vs {law}");
        means.push(mean);
    }
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn hbt_plateau_normalizes_to_one() {
    let h = simulate_hbt(1, &HbtConfig { acquisition_s: 20.0, ..HbtConfig::default() }, 5).unwrap();
    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let far: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|v| v[0].abs() >= 50.0)
        .map(|v| v[2])
        .collect();
    let mean = far.iter().sum::<f64>() / far.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "{mean}");
}
