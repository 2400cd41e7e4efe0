use chrono::NaiveDate;
use ecmarket::config::{AssetSettings, DemandProfile};
use ecmarket::fan::{class_mean, sample_days, sample_fan};
use ecmarket::history::{DayClass, DayRecord};
use ecmarket::synthetic::synthetic_window;

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn assets() -> ecmarket::config::EcConfig {
    AssetSettings::default().resolve(&DemandProfile::flat(4.0, 1.0, 5.0)).unwrap()
}

#[test]
fn fan_mean_is_within_three_standard_errors() {
    let window = synthetic_window(ymd(2022, 1, 1), ymd(2023, 11, 30), 11);
    let target = ymd(2023, 12, 5);
    let class = DayClass::of(target);
    let config = assets();
    let daily = |d: &DayRecord| d.da_price.iter().sum::<f64>() / 24.0;
    let pool: Vec<f64> = window.class_indices(class).iter().map(|&k| daily(&window.days[k])).collect();
    let mu = pool.iter().sum::<f64>() / pool.len() as f64;
    let sd = (pool.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / pool.len() as f64).sqrt();
    let hourly = class_mean(&window, class, |d| &d.da_price);
    assert!((hourly.iter().sum::<f64>() / 24.0 - mu).abs() < 1e-9);

    for (n, seed) in [(200, 1u64), (400, 2), (1000, 3)] {
        let fan = sample_fan(&window, &config, n, seed, target).unwrap();
        let mean = fan.scenarios.iter().map(|s| s.da_price.iter().sum::<f64>() / 24.0).sum::<f64>() / n as f64;
        let se = sd / (n as f64).sqrt();
        assert!((mean - mu).abs() <= 3.0 * se, "n={n}: fan mean {mean:.3}, class mean {mu:.3}, se {se:.3}");
        let pv = fan.scenarios.iter().map(|s| s.pv[12]).sum::<f64>() / n as f64;
        let pv_mu = class_mean(&window, class, |d| &d.pv_cf)[12] * config.pv_capacity;
        assert!(pv > 0.0 && (pv - pv_mu).abs() < 0.25 * pv_mu, "midday PV {pv} vs {pv_mu}");
    }
}

#[test]
fn oversampling_a_short_history_repeats_days() {
    let window = synthetic_window(ymd(2022, 1, 1), ymd(2023, 12, 1), 3);
    assert!(window.len() >= 700);
    let target = ymd(2023, 12, 6);
    let (drawn, scenarios) = sample_days(&window, &assets(), 750, 9, target).unwrap();
    assert_eq!(scenarios.len(), 750);
    let mut unique = drawn.clone();
    unique.sort_unstable();
    unique.dedup();
    assert!(unique.len() < drawn.len());
    assert!(drawn.iter().all(|&k| DayClass::of(window.days[k].date) == DayClass::of(target)));
}

#[test]
fn same_seed_same_fan_and_weekend_pool() {
    let window = synthetic_window(ymd(2023, 1, 1), ymd(2023, 6, 30), 4);
    let config = assets();
    let saturday = ymd(2023, 7, 1);
    let a = sample_fan(&window, &config, 50, 77, saturday).unwrap();
    assert_eq!(a, sample_fan(&window, &config, 50, 77, saturday).unwrap());
    assert_ne!(a, sample_fan(&window, &config, 50, 78, saturday).unwrap());
    let (drawn, _) = sample_days(&window, &config, 50, 77, saturday).unwrap();
    assert!(drawn.iter().all(|&k| DayClass::of(window.days[k].date) == DayClass::Weekend));
}
