//! Seeded synthetic datasets shaped like hourly traffic-counter and weather
//! feeds.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use varlab::frame::{format_value, hourly_grid};
use varlab::ingest::{ImputationPolicy, RawSource, SourceKind};
use varlab::TimeSeriesFrame;

use crate::config::PipelineConfig;
use crate::error::{Result, RunError};

pub const WEATHER_COLUMNS: [&str; 13] =
    ["rain", "temp", "wetb", "dewpt", "rhum", "vappr", "msl", "wdsp", "wddir", "sun", "vis", "clht", "clamt"];

pub const WEATHER_TIMESTAMP_FORMAT: &str = "%d/%m/%Y %H:%M";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub start: NaiveDateTime,
    pub hours: usize,
    pub stations: usize,
    /// Number of weather columns, taken from the front of [`WEATHER_COLUMNS`].
    pub weather: usize,
    pub seed: u64,
    /// Blank out a few cells and one multi-hour block so imputation has work.
    pub missing: bool,
}

impl SyntheticSpec {
    pub fn station_names(&self) -> Vec<String> {
        (0..self.stations).map(|i| format!("station{i}")).collect()
    }

    pub fn weather_names(&self) -> Vec<String> {
        WEATHER_COLUMNS[..self.weather].iter().map(|s| s.to_string()).collect()
    }
}

/// Commuter-shaped daily profile with a weekend dip, roughly in `[-1, 1]`.
fn daily_profile(ts: NaiveDateTime) -> f64 {
    let h = ts.hour() as f64;
    let bump = |centre: f64, width: f64| (-(h - centre).powi(2) / (2.0 * width * width)).exp();
    let weekday = ts.weekday().num_days_from_monday() < 5;
    let peaks = if weekday { bump(8.0, 1.5) + 0.9 * bump(17.5, 2.0) } else { 0.6 * bump(13.0, 3.0) };
    let night = -0.8 * bump(3.0, 2.0);
    peaks + night
}

struct Ar1 {
    phi: f64,
    state: f64,
}

impl Ar1 {
    fn step(&mut self, shock: f64) -> f64 {
        self.state = self.phi * self.state + shock;
        self.state
    }
}

/// Traffic and weather frames on the hourly grid, with `NaN` for blanked cells.
pub fn generate(spec: &SyntheticSpec) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    if spec.weather > WEATHER_COLUMNS.len() || spec.stations == 0 || spec.hours < 2 {
        return Err(RunError::Config(format!(
            "synthetic dataset needs 1+ stations, at most {} weather columns and 2+ hours",
            WEATHER_COLUMNS.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let index = hourly_grid(spec.start, spec.hours);
    let k = spec.stations;
    let base: Vec<f64> = (0..k).map(|i| 400.0 + 1600.0 * ((i * 37 % 11) as f64 / 10.0)).collect();
    let mut traffic = DMatrix::zeros(spec.hours, k);
    let mut weather = DMatrix::zeros(spec.hours, spec.weather);
    let mut dyn_state = vec![0.0; k];
    let mut w_states: Vec<Ar1> = (0..WEATHER_COLUMNS.len())
        .map(|j| Ar1 { phi: [0.7, 0.97, 0.95, 0.97, 0.9, 0.95, 0.995, 0.9, 0.9, 0.8, 0.9, 0.85, 0.85][j], state: 0.0 })
        .collect();

    for (t, ts) in index.iter().enumerate() {
        let day_angle = 2.0 * std::f64::consts::PI * (ts.hour() as f64 - 15.0) / 24.0;
        let year_angle = 2.0 * std::f64::consts::PI * (ts.ordinal() as f64 - 200.0) / 365.0;
        let shocks: Vec<f64> = (0..WEATHER_COLUMNS.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w: Vec<f64> = w_states.iter_mut().zip(&shocks).map(|(s, e)| s.step(*e)).collect();
        let temp = 10.0 + 5.0 * year_angle.cos() + 3.0 * day_angle.cos() + 0.8 * w[1];
        let rain = (0.3 * w[0] - 0.6).max(0.0);
        let daylight = (6..=19).contains(&ts.hour());
        let all = [
            (rain * 10.0).round() / 10.0,
            temp,
            temp - 1.0 - 0.2 * w[2].abs(),
            temp - 3.0 + 0.5 * w[3],
            (80.0 + 4.0 * w[4] - 2.0 * day_angle.cos()).clamp(30.0, 100.0),
            10.0 + 0.3 * temp + 0.5 * w[5],
            1013.0 + 1.0 * w[6],
            (10.0 + 1.5 * w[7]).max(0.0),
            (220.0 + 25.0 * w[8]).rem_euclid(360.0),
            if daylight { (0.5 + 0.3 * w[9]).clamp(0.0, 1.0) } else { 0.0 },
            (25000.0 + 3000.0 * w[10] - 5000.0 * rain).max(100.0),
            (60.0 + 10.0 * w[11]).max(1.0),
            (4.0 + w[12]).clamp(0.0, 8.0).round(),
        ];
        for j in 0..spec.weather {
            weather[(t, j)] = all[j];
        }

        let prev = dyn_state.clone();
        for i in 0..k {
            let neighbour = prev[(i + k - 1) % k];
            let e: f64 = StandardNormal.sample(&mut rng);
            dyn_state[i] = 0.55 * prev[i] + 0.1 * neighbour + 0.06 * base[i] * e;
            let level = base[i] * (1.0 + 0.45 * daily_profile(*ts));
            traffic[(t, i)] = (level + dyn_state[i] - 15.0 * rain).max(0.0).round();
        }
    }

    if spec.missing {
        let cells = (spec.hours * k / 500).max(1);
        for _ in 0..cells {
            let (t, i) = (rng.random_range(0..spec.hours), rng.random_range(0..k));
            traffic[(t, i)] = f64::NAN;
        }
        if spec.hours > 100 {
            let start = rng.random_range(24..spec.hours - 30);
            let col = rng.random_range(0..k);
            for t in start..start + 6 {
                traffic[(t, col)] = f64::NAN;
            }
        }
        if spec.weather > 0 {
            let t = rng.random_range(0..spec.hours);
            weather.row_mut(t).fill(f64::NAN);
        }
    }

    Ok((
        TimeSeriesFrame::new(index.clone(), spec.station_names(), traffic)?,
        TimeSeriesFrame::new(index, spec.weather_names(), weather)?,
    ))
}

fn write_source(frame: &TimeSeriesFrame, ts_col: &str, format: &str, path: &Path, skip_blank_rows: bool) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| RunError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec![ts_col.to_string()];
    header.extend(frame.columns().iter().cloned());
    w.write_record(&header).map_err(varlab::Error::from)?;
    for (i, ts) in frame.index().iter().enumerate() {
        let row = frame.values().row(i);
        // a fully missing source row is left out of the file, as a feed outage would be
        if skip_blank_rows && row.iter().all(|v| v.is_nan()) {
            continue;
        }
        let mut rec = vec![ts.format(format).to_string()];
        rec.extend(row.iter().map(|v| format_value(*v)));
        w.write_record(&rec).map_err(varlab::Error::from)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))?;
    Ok(())
}

/// Writes `traffic.csv`, `weather.csv` and a matching `config.json` into
/// `dir`. The last day is held out. Source paths in the returned config are
/// absolute; the file on disk uses paths relative to `dir`.
pub fn write_dataset(spec: &SyntheticSpec, dir: &Path) -> Result<PipelineConfig> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let (traffic, weather) = generate(spec)?;
    let mut sources = vec![RawSource {
        path: "traffic.csv".into(),
        kind: SourceKind::Traffic,
        timestamp_column: "timestamp".into(),
        value_columns: spec.station_names(),
        timestamp_format: varlab::frame::TIMESTAMP_FORMAT.into(),
    }];
    write_source(&traffic, "timestamp", varlab::frame::TIMESTAMP_FORMAT, &dir.join("traffic.csv"), false)?;
    if spec.weather > 0 {
        write_source(&weather, "date", WEATHER_TIMESTAMP_FORMAT, &dir.join("weather.csv"), true)?;
        sources.push(RawSource {
            path: "weather.csv".into(),
            kind: SourceKind::Weather,
            timestamp_column: "date".into(),
            value_columns: spec.weather_names(),
            timestamp_format: WEATHER_TIMESTAMP_FORMAT.into(),
        });
    }
    let last = spec.start + Duration::hours(spec.hours as i64 - 1);
    let test_start = (last - Duration::hours(23)).date().and_hms_opt(0, 0, 0).expect("midnight");
    let mut config = PipelineConfig {
        sources,
        imputation: ImputationPolicy::default(),
        test_start,
        start: Some(spec.start),
        end: Some(last),
        grid_lags: vec![12, 24, 36, 48],
        grid_trends: varlab::var::TrendSpec::ALL.to_vec(),
        granger_lag: 12,
        fevd_horizon: varlab::fevd::DEFAULT_HORIZON,
        fevd_order: None,
        validation_hours: 24,
        adf_terms: varlab::stattests::AdfTerms::Constant,
        adf_max_lag: None,
        auto_difference: false,
        plot_columns: None,
        output_dir: "output".into(),
        seed: spec.seed,
    };
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_canonical_json()?).map_err(|e| RunError::io(&path, e))?;
    for s in &mut config.sources {
        s.path = dir.join(&s.path);
    }
    config.output_dir = dir.join("output");
    Ok(config)
}

/// Simulates `y_t = c + Σ A_i y_{t-i} + u_t` with `u_t ~ N(0, σ² I)`, after a
/// burn-in of 500 steps.
pub fn simulate_var(
    lags: &[DMatrix<f64>],
    intercept: &[f64],
    sigma: f64,
    start: NaiveDateTime,
    hours: usize,
    seed: u64,
) -> Result<TimeSeriesFrame> {
    let k = intercept.len();
    if lags.iter().any(|a| a.shape() != (k, k)) {
        return Err(RunError::Config("lag matrices must be K x K".into()));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| RunError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 500;
    let total = hours + burn;
    let mut y = DMatrix::<f64>::zeros(total, k);
    for t in 0..total {
        for eq in 0..k {
            let mut v = intercept[eq] + noise.sample(&mut rng);
            for (i, a) in lags.iter().enumerate() {
                if t > i {
                    for j in 0..k {
                        v += a[(eq, j)] * y[(t - 1 - i, j)];
                    }
                }
            }
            y[(t, eq)] = v;
        }
    }
    let cols = (0..k).map(|j| format!("y{j}")).collect();
    Ok(TimeSeriesFrame::hourly(start, cols, y.rows(burn, hours).into_owned())?)
}
