//! Discrete-phase reflections and received-power measurement campaigns.
//!
//! A campaign applies `T` random reflections `v_t = [u_t; 1]`, `u_t ∈ Φ_b`,
//! and records the noiseless power `p_t = |v_t^H h̄|² = tr(H̄ V_t)`, or an
//! RSRP-style noisy estimate of it.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::complex_normal;

/// Largest supported number of phase-control bits.
pub const MAX_BITS: u32 = 16;

/// Tolerance used when mapping a stored complex entry back to a phase index.
const PHASE_MATCH_TOL: f64 = 1e-9;

/// `Φ_b`: the `2^b` unit-modulus values `exp(j·2πk/2^b)`, `k = 0..2^b`.
///
/// Index `k` has phase angle `2πk/2^b`, so index 0 is `+1`. Quarter-turn
/// multiples are exact (`b = 1` gives exactly `{+1, −1}`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    bits: u32,
    values: Vec<Complex64>,
}

impl PhaseSet {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(invalid(format!("phase bits must be in 1..={MAX_BITS}, got {bits}")));
        }
        let levels = 1usize << bits;
        let values = (0..levels).map(|k| unit_phase(k, levels)).collect();
        Ok(Self { bits, values })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn step(&self) -> f64 {
        std::f64::consts::TAU / self.len() as f64
    }

    /// Index of the element of `Φ_b` nearest in angle to `z`. Angles exactly
    /// halfway round down to the lower index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let levels = self.len();
        let angle = z.arg().rem_euclid(std::f64::consts::TAU);
        let pos = angle / self.step();
        let mut k = pos.floor() as usize;
        if pos - k as f64 > 0.5 {
            k += 1;
        }
        k % levels
    }

    /// Index of `z` if it is (numerically) a member of the set.
    pub fn index_of(&self, z: Complex64) -> Option<usize> {
        let k = self.nearest(z);
        ((z - self.values[k]).norm() <= PHASE_MATCH_TOL).then_some(k)
    }
}

fn unit_phase(k: usize, levels: usize) -> Complex64 {
    // Exact values on quarter turns keep b = 1 and b = 2 vectors exact.
    if (4 * k).is_multiple_of(levels) {
        return match (4 * k / levels) % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / levels as f64)
}

/// Equivalent reflection `v = [u; 1]` with `u ∈ Φ_b^{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionVector {
    bits: u32,
    phases: Vec<usize>,
    entries: Vec<Complex64>,
}

impl ReflectionVector {
    /// From phase indices of the `N − 1` IRS elements.
    pub fn from_phase_indices(bits: u32, phases: Vec<usize>) -> Result<Self> {
        let set = PhaseSet::new(bits)?;
        if let Some(&bad) = phases.iter().find(|&&k| k >= set.len()) {
            return Err(invalid(format!("phase index {bad} out of range for b = {bits}")));
        }
        let entries = phases.iter().map(|&k| set.value(k)).chain(std::iter::once(Complex64::new(1.0, 0.0))).collect();
        Ok(Self { bits, phases, entries })
    }

    /// From full entries; every entry must lie in `Φ_b` and the last must be 1.
    pub fn from_entries(bits: u32, entries: &[Complex64]) -> Result<Self> {
        let set = PhaseSet::new(bits)?;
        let Some((last, body)) = entries.split_last() else {
            return Err(invalid("reflection vector must have at least one entry"));
        };
        if (*last - Complex64::new(1.0, 0.0)).norm() > PHASE_MATCH_TOL {
            return Err(invalid(format!("last reflection entry must be 1, got {last}")));
        }
        let phases = body
            .iter()
            .enumerate()
            .map(|(n, &z)| {
                set.index_of(z).ok_or_else(|| invalid(format!("entry {n} = {z} is not in the b = {bits} phase set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_phase_indices(bits, phases)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Phase indices of the IRS elements (excludes the trailing 1).
    pub fn phase_indices(&self) -> &[usize] {
        &self.phases
    }

    /// `v^H h`.
    pub fn inner(&self, h: &[Complex64]) -> Complex64 {
        self.entries.iter().zip(h).map(|(v, x)| v.conj() * x).sum()
    }
}

/// One reflection and its measured power.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub reflection: ReflectionVector,
    /// Watts, non-negative.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementMode {
    /// Noiseless `|v^H h̄|²`.
    Exact,
    /// Average of `averaging` noisy received powers, noise power `sigma2` (W) removed.
    Rsrp { averaging: usize, sigma2: f64 },
}

impl MeasurementMode {
    pub fn label(&self) -> String {
        match self {
            MeasurementMode::Exact => "exact".into(),
            MeasurementMode::Rsrp { averaging, sigma2 } => format!("rsrp:{averaging}:{sigma2:e}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "exact" {
            return Some(MeasurementMode::Exact);
        }
        let mut parts = s.strip_prefix("rsrp:")?.split(':');
        let averaging = parts.next()?.parse().ok()?;
        let sigma2 = parts.next()?.parse().ok()?;
        if parts.next().is_some() || averaging == 0 || !(sigma2 >= 0.0) {
            return None;
        }
        Some(MeasurementMode::Rsrp { averaging, sigma2 })
    }
}

/// Campaign-level bookkeeping carried alongside the records.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignMeta {
    pub seed: Option<u64>,
    pub mode: MeasurementMode,
    /// RSRP samples that came out negative after noise removal and were clamped to 0.
    pub clamped: usize,
    /// Largest per-record standard error of the RSRP mean (W); 0 in exact mode.
    pub rsrp_std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub records: Vec<MeasurementRecord>,
    pub bits: u32,
    pub dim: usize,
    pub meta: CampaignMeta,
}

impl Campaign {
    pub fn new(records: Vec<MeasurementRecord>, bits: u32, dim: usize, meta: CampaignMeta) -> Result<Self> {
        if records.is_empty() {
            return Err(invalid("campaign needs at least one record"));
        }
        for (t, r) in records.iter().enumerate() {
            if r.reflection.bits() != bits || r.reflection.dim() != dim {
                return Err(invalid(format!(
                    "record {t} has b = {}, N = {}; campaign has b = {bits}, N = {dim}",
                    r.reflection.bits(),
                    r.reflection.dim()
                )));
            }
            if !(r.power >= 0.0 && r.power.is_finite()) {
                return Err(invalid(format!("record {t} has invalid power {}", r.power)));
            }
        }
        Ok(Self { records, bits, dim, meta })
    }

    /// Exact-mode campaign from (reflection, power) pairs.
    pub fn from_records(records: Vec<MeasurementRecord>) -> Result<Self> {
        let first = records.first().ok_or_else(|| invalid("campaign needs at least one record"))?;
        let (bits, dim) = (first.reflection.bits(), first.reflection.dim());
        Self::new(
            records,
            bits,
            dim,
            CampaignMeta { seed: None, mode: MeasurementMode::Exact, clamped: 0, rsrp_std_error: 0.0 },
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.power).collect()
    }

    /// First `t` records, sharing metadata.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        Self::new(self.records[..t.min(self.len())].to_vec(), self.bits, self.dim, self.meta.clone())
    }

    /// Writes the campaign CSV: a `#` metadata line, the header
    /// `t,p_watts,v_real_0..,v_imag_0..`, then one row per record with every
    /// float in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(
            out,
            "# b={},N={},seed={},mode={},clamped={},rsrp_std_error={:e}",
            self.bits,
            self.dim,
            self.meta.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            self.meta.mode.label(),
            self.meta.clamped,
            self.meta.rsrp_std_error
        )?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "p_watts".to_string()];
        header.extend((0..self.dim).map(|n| format!("v_real_{n}")));
        header.extend((0..self.dim).map(|n| format!("v_imag_{n}")));
        w.write_record(&header).map_err(csv_io)?;
        for (t, r) in self.records.iter().enumerate() {
            let mut row = vec![t.to_string(), format!("{:e}", r.power)];
            row.extend(r.reflection.entries().iter().map(|z| format!("{:e}", z.re)));
            row.extend(r.reflection.entries().iter().map(|z| format!("{:e}", z.im)));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut meta_line = None;
        let mut body = String::new();
        let mut first_body_line = 0;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if meta_line.is_none() {
                    meta_line = Some((i + 1, rest.trim().to_string()));
                }
                continue;
            }
            if body.is_empty() {
                first_body_line = i + 1;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let (meta_lineno, meta_text) =
            meta_line.ok_or(Error::Parse { line: 1, msg: "missing `# b=..,N=..` metadata line".into() })?;
        let meta = parse_meta(&meta_text).map_err(|msg| Error::Parse { line: meta_lineno, msg })?;
        let (bits, dim) = (meta.bits, meta.dim);

        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(body.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Parse { line: first_body_line, msg: e.to_string() })?.clone();
        let expected = 2 + 2 * dim;
        if header.len() != expected || &header[0] != "t" || &header[1] != "p_watts" {
            return Err(Error::Parse {
                line: first_body_line,
                msg: format!("expected header t,p_watts,v_real_0..{0},v_imag_0..{0} ({expected} columns)", dim - 1),
            });
        }
        let mut records = Vec::new();
        for (row_idx, row) in rdr.records().enumerate() {
            let line = first_body_line + 1 + row_idx;
            let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if row.len() != expected {
                return Err(Error::Parse { line, msg: format!("expected {expected} fields, got {}", row.len()) });
            }
            let num = |k: usize| -> Result<f64> {
                row[k]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line, msg: format!("bad number `{}` in column {k}", &row[k]) })
            };
            let power = num(1)?;
            let entries =
                (0..dim).map(|n| Ok(Complex64::new(num(2 + n)?, num(2 + dim + n)?))).collect::<Result<Vec<_>>>()?;
            let reflection = ReflectionVector::from_entries(bits, &entries)
                .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            records.push(MeasurementRecord { reflection, power });
        }
        if records.is_empty() {
            return Err(Error::Parse { line: first_body_line.max(1), msg: "campaign has no records".into() });
        }
        Campaign::new(records, bits, dim, meta.meta)
            .map_err(|e| Error::Parse { line: first_body_line, msg: e.to_string() })
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

struct ParsedMeta {
    bits: u32,
    dim: usize,
    meta: CampaignMeta,
}

fn parse_meta(text: &str) -> std::result::Result<ParsedMeta, String> {
    let mut bits = None;
    let mut dim = None;
    let mut meta = CampaignMeta { seed: None, mode: MeasurementMode::Exact, clamped: 0, rsrp_std_error: 0.0 };
    for field in text.split(',') {
        let (k, v) = field.split_once('=').ok_or_else(|| format!("metadata field `{field}` is not key=value"))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = || format!("bad value `{v}` for metadata key `{k}`");
        match k {
            "b" => bits = Some(v.parse::<u32>().map_err(|_| bad())?),
            "N" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "seed" => meta.seed = if v == "none" { None } else { Some(v.parse().map_err(|_| bad())?) },
            "mode" => meta.mode = MeasurementMode::parse(v).ok_or_else(bad)?,
            "clamped" => meta.clamped = v.parse().map_err(|_| bad())?,
            "rsrp_std_error" => meta.rsrp_std_error = v.parse().map_err(|_| bad())?,
            _ => return Err(format!("unknown metadata key `{k}`")),
        }
    }
    let bits = bits.ok_or("metadata is missing b")?;
    let dim = dim.ok_or("metadata is missing N")?;
    if dim == 0 {
        return Err("N must be at least 1".into());
    }
    PhaseSet::new(bits).map_err(|e| e.to_string())?;
    Ok(ParsedMeta { bits, dim, meta })
}

/// `v = [u; 1]` with each `u_n` uniform over `Φ_b`.
pub fn random_reflection<R: Rng + ?Sized>(n_irs: usize, bits: u32, rng: &mut R) -> Result<ReflectionVector> {
    let levels = PhaseSet::new(bits)?.len();
    let phases = (0..n_irs).map(|_| rng.random_range(0..levels)).collect();
    ReflectionVector::from_phase_indices(bits, phases)
}

/// Noiseless `|v^H h̄|²`.
pub fn measure_power(h_bar: &[Complex64], v: &ReflectionVector) -> Result<f64> {
    if h_bar.len() != v.dim() {
        return Err(invalid(format!("dimension mismatch: h̄ has {}, v has {}", h_bar.len(), v.dim())));
    }
    Ok(v.inner(h_bar).norm_sqr())
}

/// Result of one RSRP measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsrpSample {
    /// Noise-removed power, clamped at 0.
    pub power: f64,
    pub clamped: bool,
    /// Standard error of the averaged received power.
    pub std_error: f64,
}

/// `(1/K) Σ |v^H h̄ + z_k|² − σ²` with `z_k ~ CN(0, σ²)`.
pub fn measure_rsrp<R: Rng + ?Sized>(
    h_bar: &[Complex64],
    v: &ReflectionVector,
    sigma2: f64,
    averaging: usize,
    rng: &mut R,
) -> Result<RsrpSample> {
    if averaging == 0 {
        return Err(invalid("RSRP averaging count must be at least 1"));
    }
    if !(sigma2 >= 0.0) {
        return Err(invalid("noise power must be non-negative"));
    }
    let signal = v.inner(h_bar);
    if sigma2 == 0.0 {
        return Ok(RsrpSample { power: signal.norm_sqr(), clamped: false, std_error: 0.0 });
    }
    let sigma = sigma2.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..averaging {
        let y = (signal + complex_normal(rng) * sigma).norm_sqr();
        sum += y;
        sum_sq += y * y;
    }
    let k = averaging as f64;
    let mean = sum / k;
    let var = if averaging > 1 { ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0) } else { 0.0 };
    let raw = mean - sigma2;
    Ok(RsrpSample { power: raw.max(0.0), clamped: raw < 0.0, std_error: (var / k).sqrt() })
}

/// `T` measurements with independent random reflections.
pub fn run_campaign<R: Rng + ?Sized>(
    h_bar: &[Complex64],
    t: usize,
    bits: u32,
    rng: &mut R,
    mode: MeasurementMode,
) -> Result<Campaign> {
    if t == 0 {
        return Err(invalid("campaign length T must be at least 1"));
    }
    if h_bar.is_empty() {
        return Err(invalid("equivalent channel is empty"));
    }
    let n_irs = h_bar.len() - 1;
    let mut records = Vec::with_capacity(t);
    let mut clamped = 0;
    let mut max_se: f64 = 0.0;
    for _ in 0..t {
        let reflection = random_reflection(n_irs, bits, rng)?;
        let power = match mode {
            MeasurementMode::Exact => measure_power(h_bar, &reflection)?,
            MeasurementMode::Rsrp { averaging, sigma2 } => {
                let s = measure_rsrp(h_bar, &reflection, sigma2, averaging, rng)?;
                clamped += usize::from(s.clamped);
                max_se = max_se.max(s.std_error);
                s.power
            }
        };
        records.push(MeasurementRecord { reflection, power });
    }
    Campaign::new(records, bits, h_bar.len(), CampaignMeta { seed: None, mode, clamped, rsrp_std_error: max_se })
}
