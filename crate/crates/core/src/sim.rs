//! Fixed-step simulation engine: clock, transport delays, time-series log and
//! the two-rate (outer reasoning / inner motion control) loop driver.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes and horizon of one run. All values in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimClock {
    pub t_end: f64,
    pub dt_inner: f64,
    pub dt_outer: f64,
    pub t_stabilize: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            t_end: 22.0,
            dt_inner: 1e-3,
            dt_outer: 1e-2,
            t_stabilize: 2.0,
        }
    }
}

impl SimClock {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.t_end, self.dt_inner, self.dt_outer, self.t_stabilize]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidConfig("clock values must be finite".into()));
        }
        if self.dt_inner <= 0.0 {
            return Err(Error::InvalidConfig("dt_inner must be positive".into()));
        }
        if self.dt_outer < self.dt_inner {
            return Err(Error::InvalidConfig("dt_outer must be >= dt_inner".into()));
        }
        let ratio = self.dt_outer / self.dt_inner;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvalidConfig(
                "dt_outer must be an integer multiple of dt_inner".into(),
            ));
        }
        if !(0.0 <= self.t_stabilize && self.t_stabilize < self.t_end) {
            return Err(Error::InvalidConfig(
                "t_stabilize must satisfy 0 <= t_stabilize < t_end".into(),
            ));
        }
        if self.t_end / self.dt_inner > 1e8 {
            return Err(Error::InvalidConfig("too many inner steps".into()));
        }
        Ok(())
    }

    /// Number of inner steps (= logged samples) in the run.
    pub fn inner_steps(&self) -> usize {
        (self.t_end / self.dt_inner).round() as usize
    }

    /// Inner steps per outer step.
    pub fn outer_every(&self) -> usize {
        (self.dt_outer / self.dt_inner).round() as usize
    }

    /// Sample time of inner step `k`. Computed from the index, never accumulated.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt_inner
    }
}

/// Pure transport delay with zero-order hold between pushed samples.
#[derive(Debug, Clone)]
pub struct DelayLine {
    delay: f64,
    initial_value: f64,
    capacity: usize,
    samples: VecDeque<(f64, f64)>,
    dropped: bool,
}

impl DelayLine {
    /// `dt` is the interval at which samples will be pushed; it sizes the ring.
    pub fn new(delay: f64, dt: f64, initial_value: f64) -> Result<Self> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::InvalidConfig(format!("delay must be >= 0, got {delay}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidConfig(format!("delay sample interval must be > 0, got {dt}")));
        }
        let capacity = (delay / dt).ceil() as usize + 2;
        Ok(Self {
            delay,
            initial_value,
            capacity,
            samples: VecDeque::with_capacity(capacity),
            dropped: false,
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.back() {
            if t < last {
                return Err(Error::DelayOrder { t, last });
            }
            if t == last {
                self.samples.pop_back();
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
            self.dropped = true;
        }
        self.samples.push_back((t, value));
        Ok(())
    }

    /// Value that was pushed at `t - delay` (latest sample not after it).
    pub fn read(&self, t: f64) -> Result<f64> {
        let target = t - self.delay;
        let eps = 1e-9 * target.abs().max(1.0);
        let Some(&(oldest, _)) = self.samples.front() else {
            return Ok(self.initial_value);
        };
        if target + eps < oldest {
            if self.dropped {
                return Err(Error::DelayUndersized { t, target, oldest });
            }
            return Ok(self.initial_value);
        }
        let idx = self.samples.partition_point(|&(ts, _)| ts <= target + eps);
        Ok(self.samples[idx - 1].1)
    }
}

/// Uniformly sampled multi-channel time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    dt: f64,
    names: Vec<String>,
    units: Vec<String>,
    index: HashMap<String, usize>,
    time: Vec<f64>,
    data: Vec<Vec<f64>>,
}

impl SimLog {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            names: Vec::new(),
            units: Vec::new(),
            index: HashMap::new(),
            time: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Registers a channel and returns its column index. Channels must be
    /// registered before the first sample is pushed.
    pub fn register(&mut self, name: &str, units: &str) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateChannel(name.to_string()));
        }
        if !self.time.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "channel `{name}` registered after sampling started"
            )));
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.units.push(units.to_string());
        self.index.insert(name.to_string(), id);
        self.data.push(Vec::new());
        Ok(id)
    }

    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::RowWidth {
                got: row.len(),
                expected: self.names.len(),
            });
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: self.names[i].clone(),
                t,
            });
        }
        self.time.push(t);
        for (col, &v) in self.data.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn units(&self, name: &str) -> Option<&str> {
        self.index.get(name).map(|&i| self.units[i].as_str())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.index
            .get(name)
            .map(|&i| self.data[i].as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    /// CSV with a `time,<channel>,...` header; every value carries ten
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (k, t) in self.time.iter().enumerate() {
            write!(w, "{t:.9e}")?;
            for col in &self.data {
                write!(w, ",{:.9e}", col[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// Drives a two-rate loop. `outer` runs at every `dt_outer` boundary before
/// the inner step of the same instant; `inner` fills the log row for time `t`
/// and advances `state` to `t + dt_inner`.
pub fn run_loop<S, O, I>(
    clock: &SimClock,
    state: &mut S,
    mut log: SimLog,
    mut outer: O,
    mut inner: I,
) -> Result<SimLog>
where
    O: FnMut(f64, &mut S) -> Result<()>,
    I: FnMut(f64, &mut S, &mut [f64]) -> Result<()>,
{
    clock.validate()?;
    let steps = clock.inner_steps();
    let every = clock.outer_every();
    let mut row = vec![0.0; log.width()];
    for k in 0..steps {
        let t = clock.time(k);
        if k % every == 0 {
            outer(t, state)?;
        }
        row.iter_mut().for_each(|v| *v = 0.0);
        inner(t, state, &mut row)?;
        log.push(t, &row)?;
    }
    Ok(log)
}

/// One classical fourth-order Runge-Kutta step of `x' = f(x)`.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], dt: f64, mut f: F) -> [f64; N]
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let axpy = |a: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *a;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, 0.5 * dt));
    let k3 = f(&axpy(x, &k2, 0.5 * dt));
    let k4 = f(&axpy(x, &k3, dt));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock(t_end: f64, dt_inner: f64, dt_outer: f64) -> SimClock {
        SimClock {
            t_end,
            dt_inner,
            dt_outer,
            t_stabilize: 0.0,
        }
    }

    #[test]
    fn clock_validation() {
        assert!(SimClock::default().validate().is_ok());
        assert!(clock(1.0, 0.0, 0.01).validate().is_err());
        assert!(clock(1.0, 0.001, 0.0015).validate().is_err());
        let c = SimClock {
            t_stabilize: 22.0,
            ..SimClock::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn loop_counts() {
        let c = clock(1.0, 0.001, 0.01);
        let mut log = SimLog::new(c.dt_inner);
        log.register("k", "-").unwrap();
        let mut calls = (0usize, Vec::new());
        let log = run_loop(
            &c,
            &mut calls,
            log,
            |_, s| {
                s.1.push(s.0);
                Ok(())
            },
            |_, s, row| {
                row[0] = s.0 as f64;
                s.0 += 1;
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(log.len(), 1000);
        assert_eq!(calls.1.len(), 100);
        assert!(calls.1.iter().enumerate().all(|(i, &k)| k == 10 * i));
    }

    #[test]
    fn loop_aborts_on_non_finite() {
        let c = clock(1.0, 0.001, 0.01);
        let mut log = SimLog::new(c.dt_inner);
        log.register("a", "-").unwrap();
        log.register("bad", "-").unwrap();
        let err = run_loop(
            &c,
            &mut (),
            log,
            |_, _| Ok(()),
            |t, _, row| {
                row[1] = if t > 0.5 { f64::NAN } else { 0.0 };
                Ok(())
            },
        )
        .unwrap_err();
        match err {
            Error::NonFinite { channel, t } => {
                assert_eq!(channel, "bad");
                assert!((t - 0.501).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn delay_zero_is_identity() {
        let mut d = DelayLine::new(0.0, 0.01, -1.0).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.01;
            d.push(t, (k * k) as f64).unwrap();
            assert_eq!(d.read(t).unwrap(), (k * k) as f64);
        }
    }

    #[test]
    fn delay_step() {
        let dt = 0.001;
        let mut d = DelayLine::new(0.1, dt, 0.0).unwrap();
        let mut out = Vec::new();
        for k in 0..1500 {
            let t = k as f64 * dt;
            d.push(t, if k >= 1000 { 1.0 } else { 0.0 }).unwrap();
            out.push(d.read(t).unwrap());
        }
        let first = out.iter().position(|&v| v == 1.0).unwrap();
        assert_eq!(first, 1100);
    }

    #[test]
    fn delay_constant_and_initial() {
        let mut d = DelayLine::new(0.4, 0.01, 7.0).unwrap();
        assert_eq!(d.read(0.0).unwrap(), 7.0);
        for k in 0..200 {
            let t = k as f64 * 0.01;
            d.push(t, 3.0).unwrap();
            let v = d.read(t).unwrap();
            if t < 0.4 - 1e-9 {
                assert_eq!(v, 7.0);
            } else {
                assert_eq!(v, 3.0);
            }
        }
    }

    #[test]
    fn delay_undersized_read_fails() {
        let mut d = DelayLine::new(0.05, 0.01, 0.0).unwrap();
        for k in 0..100 {
            d.push(k as f64 * 0.01, 1.0).unwrap();
        }
        assert!(matches!(d.read(0.5), Err(Error::DelayUndersized { .. })));
        assert!(d.push(0.2, 0.0).is_err());
    }

    #[test]
    fn csv_header_and_precision() {
        let mut log = SimLog::new(0.5);
        log.register("a", "m").unwrap();
        log.register("b", "s").unwrap();
        log.push(0.0, &[1.0 / 3.0, 2.0]).unwrap();
        let s = log.to_csv_string();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "time,a,b");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let a: f64 = row[1].parse().unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-10);
        assert!(log.register("a", "m").is_err());
        assert!(log.push(0.5, &[1.0]).is_err());
    }

    #[test]
    fn rk4_exponential() {
        let mut x = [1.0];
        for _ in 0..1000 {
            x = rk4_step(&x, 1e-3, |x| [-x[0]]);
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-12);
    }
}
