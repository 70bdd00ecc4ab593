//! File formats: measurement-record CSV, channel and session-config JSON,
//! report DTOs, and a JSON writer that prints floats with enough digits to
//! round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use decoyqkd::bounds::{KeyYield, SecurityBounds};
use decoyqkd::channel::ChannelModel;
use decoyqkd::sim::{AttackModel, SessionConfig, SessionTally, Verdict, ZScore};
use decoyqkd::types::{IntensityLabel, IntensitySetting, ObservedStatistics, ProtocolParams};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

/// Pretty JSON with finite floats printed as 17-significant-digit scientific
/// notation: lossless round-trip and always at least 10 significant digits.
struct PreciseFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Formatter for PreciseFormatter<'_> {
    fn write_f64<W: std::io::Write + ?Sized>(
        &mut self,
        w: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
    fn begin_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_array(w)
    }
    fn end_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array(w)
    }
    fn begin_array_value<W: std::io::Write + ?Sized>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }
    fn end_array_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array_value(w)
    }
    fn begin_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object(w)
    }
    fn end_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object(w)
    }
    fn begin_object_key<W: std::io::Write + ?Sized>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }
    fn begin_object_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object_value(w)
    }
    fn end_object_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

/// Serializes a report to pretty JSON with lossless float formatting.
pub fn to_json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut out = Vec::new();
    let fmt = PreciseFormatter {
        pretty: PrettyFormatter::new(),
    };
    let mut ser = Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out)?)
}

fn parse_label(raw: &str) -> anyhow::Result<IntensityLabel> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "signal" => Ok(IntensityLabel::Signal),
        "decoy" => Ok(IntensityLabel::Decoy),
        other => bail!("unknown intensity label {other:?} (expected \"signal\" or \"decoy\")"),
    }
}

pub fn label_name(label: IntensityLabel) -> &'static str {
    match label {
        IntensityLabel::Signal => "signal",
        IntensityLabel::Decoy => "decoy",
    }
}

/// Reads a measurement-record CSV with columns
/// label,mean_photons,n_sent,n_detected,n_error; send fractions are derived
/// from the per-row sent counts.
pub fn read_measurement_records(path: &Path) -> anyhow::Result<Vec<ObservedStatistics>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    {
        let headers = reader.headers()?;
        let expected = ["label", "mean_photons", "n_sent", "n_detected", "n_error"];
        if headers.iter().collect::<Vec<_>>() != expected {
            bail!(
                "line 1: expected header {}, found {:?}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            );
        }
    }
    let mut raw_rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> anyhow::Result<&str> {
            record
                .get(i)
                .ok_or_else(|| anyhow!("line {line}: missing column {name}"))
        };
        let label = parse_label(field(0, "label")?).map_err(|e| anyhow!("line {line}: {e}"))?;
        let mean_photons: f64 = field(1, "mean_photons")?
            .parse()
            .map_err(|e| anyhow!("line {line}: bad mean_photons: {e}"))?;
        let parse_count = |i: usize, name: &str| -> anyhow::Result<u64> {
            field(i, name)?
                .parse()
                .map_err(|e| anyhow!("line {line}: bad {name}: {e}"))
        };
        let n_sent = parse_count(2, "n_sent")?;
        let n_detected = parse_count(3, "n_detected")?;
        let n_error = parse_count(4, "n_error")?;
        raw_rows.push((line, label, mean_photons, n_sent, n_detected, n_error));
    }
    if raw_rows.is_empty() {
        bail!("no data rows in {}", path.display());
    }
    let total_sent: u64 = raw_rows.iter().map(|r| r.3).sum();
    if total_sent == 0 {
        bail!("all rows have n_sent = 0");
    }
    raw_rows
        .into_iter()
        .map(|(line, label, mean_photons, n_sent, n_detected, n_error)| {
            let fraction = n_sent as f64 / total_sent as f64;
            let setting = IntensitySetting::new(label, mean_photons, fraction)
                .map_err(|e| anyhow!("line {line}: {e}"))?;
            ObservedStatistics::from_counts(setting, n_sent, n_detected, n_error)
                .map_err(|e| anyhow!("line {line}: {e}"))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelDto {
    pub alpha_db_per_km: f64,
    pub distance_km: f64,
    pub eta_receiver: f64,
    pub y0: f64,
    pub e_det: f64,
}

impl ChannelDto {
    pub fn to_model(&self) -> anyhow::Result<ChannelModel> {
        Ok(ChannelModel::new(
            self.alpha_db_per_km,
            self.distance_km,
            self.eta_receiver,
            self.y0,
            self.e_det,
        )?)
    }

    pub fn from_model(m: &ChannelModel) -> Self {
        Self {
            alpha_db_per_km: m.alpha_db_per_km,
            distance_km: m.distance_km,
            eta_receiver: m.eta_receiver,
            y0: m.y0,
            e_det: m.e_det,
        }
    }
}

/// Loads a channel from JSON: either a bare channel object or any object
/// wrapping one under a "channel" key (fit reports load directly).
pub fn read_channel(path: &Path) -> anyhow::Result<ChannelModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    #[derive(Deserialize)]
    struct Wrapped {
        channel: ChannelDto,
    }
    let dto = serde_json::from_str::<ChannelDto>(&text)
        .or_else(|_| serde_json::from_str::<Wrapped>(&text).map(|w| w.channel))
        .with_context(|| format!("{} is not a channel JSON", path.display()))?;
    dto.to_model()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityDto {
    pub label: String,
    pub mean_photons: f64,
    pub send_fraction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackDto {
    pub block_fraction_single: f64,
    pub lossless_forward: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDto {
    pub q: f64,
    pub f_ec: f64,
    pub u_alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfigDto {
    pub n_pulses: u64,
    #[serde(default)]
    pub seed: u64,
    pub intensities: Vec<IntensityDto>,
    pub channel: ChannelDto,
    #[serde(default)]
    pub attack: Option<AttackDto>,
    #[serde(default)]
    pub params: Option<ParamsDto>,
    #[serde(default)]
    pub session_seconds: Option<f64>,
}

pub struct LoadedSession {
    pub config: SessionConfig,
    pub params: ProtocolParams,
    pub session_seconds: f64,
}

pub fn read_session_config(
    path: &Path,
    seed_override: Option<u64>,
) -> anyhow::Result<LoadedSession> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let dto: SessionConfigDto = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a session config", path.display()))?;
    let intensities = dto
        .intensities
        .iter()
        .map(|i| {
            Ok(IntensitySetting::new(
                parse_label(&i.label)?,
                i.mean_photons,
                i.send_fraction,
            )?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let attack = dto
        .attack
        .map(|a| AttackModel::new(a.block_fraction_single, a.lossless_forward))
        .transpose()?;
    let params = match dto.params {
        Some(p) => ProtocolParams::new(p.q, p.f_ec, p.u_alpha)?,
        None => ProtocolParams::default(),
    };
    let session_seconds = dto.session_seconds.unwrap_or(1.0);
    let config = SessionConfig::new(
        dto.n_pulses,
        intensities,
        dto.channel.to_model()?,
        attack,
        seed_override.unwrap_or(dto.seed),
    )?;
    Ok(LoadedSession {
        config,
        params,
        session_seconds,
    })
}

#[derive(Debug, Serialize)]
pub struct StatsDto {
    pub label: &'static str,
    pub mean_photons: f64,
    pub n_sent: u64,
    pub n_detected: u64,
    pub n_error: u64,
    pub gain: f64,
    pub qber: f64,
}

impl StatsDto {
    pub fn from_stats(s: &ObservedStatistics) -> Self {
        Self {
            label: label_name(s.intensity.label),
            mean_photons: s.intensity.mean_photons,
            n_sent: s.n_sent,
            n_detected: s.n_detected,
            n_error: s.n_error,
            gain: s.gain,
            qber: s.qber,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ParamsEchoDto {
    pub q: f64,
    pub f_ec: f64,
    pub u_alpha: f64,
    pub e0: f64,
}

impl ParamsEchoDto {
    pub fn from_params(p: &ProtocolParams) -> Self {
        Self {
            q: p.q,
            f_ec: p.f_ec,
            u_alpha: p.u_alpha,
            e0: p.e0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsDto {
    pub q1_lower: f64,
    pub e1_upper: Option<f64>,
    pub q_nu_lower: f64,
    pub rate_lower: f64,
    pub secure: bool,
}

impl BoundsDto {
    pub fn from_bounds(b: &SecurityBounds) -> Self {
        Self {
            q1_lower: b.q1_lower,
            e1_upper: b.e1_upper,
            q_nu_lower: b.q_nu_lower,
            rate_lower: b.rate_lower,
            secure: b.secure,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct YieldDto {
    pub rate_per_pulse: f64,
    pub key_length_bits: f64,
    pub rate_per_second: f64,
}

impl YieldDto {
    pub fn from_yield(y: &KeyYield) -> Self {
        Self {
            rate_per_pulse: y.rate_per_pulse,
            key_length_bits: y.key_length_bits,
            rate_per_second: y.rate_per_second,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalysisInputsDto {
    pub signal: StatsDto,
    pub decoy: StatsDto,
    pub params: ParamsEchoDto,
    pub session_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReportDto {
    pub schema_version: u32,
    pub inputs: AnalysisInputsDto,
    pub bounds: BoundsDto,
    #[serde(rename = "yield")]
    pub key_yield: YieldDto,
    pub confidence_level: f64,
    pub confidence_complement: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ZScoreDto {
    pub label: &'static str,
    pub mean_photons: f64,
    pub gain_z: f64,
    pub qber_z: f64,
}

impl ZScoreDto {
    pub fn from_score(z: &ZScore) -> Self {
        Self {
            label: label_name(z.label),
            mean_photons: z.mean_photons,
            gain_z: z.gain_z,
            qber_z: z.qber_z,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerdictDto {
    pub status: &'static str,
    pub z_scores: Vec<ZScoreDto>,
}

impl VerdictDto {
    pub fn from_verdict(v: &Verdict, scores_when_clean: &[ZScore]) -> Self {
        match v {
            Verdict::Clean => Self {
                status: "clean",
                z_scores: scores_when_clean
                    .iter()
                    .map(ZScoreDto::from_score)
                    .collect(),
            },
            Verdict::Anomalous(scores) => Self {
                status: "anomalous",
                z_scores: scores.iter().map(ZScoreDto::from_score).collect(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TallyRowDto {
    pub label: &'static str,
    pub mean_photons: f64,
    pub send_fraction: f64,
    pub n_sent: u64,
    pub n_detected: u64,
    pub n_error: u64,
    pub gain: f64,
    pub qber: f64,
    pub n_sifted: u64,
}

#[derive(Debug, Serialize)]
pub struct TallyDto {
    pub per_intensity: Vec<TallyRowDto>,
    pub double_click_count: u64,
    pub double_click_errors: u64,
}

impl TallyDto {
    pub fn from_tally(t: &SessionTally) -> Self {
        Self {
            per_intensity: t
                .per_intensity
                .iter()
                .zip(&t.sifted_lengths)
                .map(|(s, &sifted)| TallyRowDto {
                    label: label_name(s.intensity.label),
                    mean_photons: s.intensity.mean_photons,
                    send_fraction: s.intensity.send_fraction,
                    n_sent: s.n_sent,
                    n_detected: s.n_detected,
                    n_error: s.n_error,
                    gain: s.gain,
                    qber: s.qber,
                    n_sifted: sifted,
                })
                .collect(),
            double_click_count: t.double_click_count,
            double_click_errors: t.double_click_errors,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalysisSectionDto {
    pub bounds: BoundsDto,
    #[serde(rename = "yield")]
    pub key_yield: YieldDto,
    pub confidence_level: f64,
    pub confidence_complement: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationReportDto {
    pub schema_version: u32,
    pub n_pulses: u64,
    pub seed: u64,
    pub params: ParamsEchoDto,
    pub tally: TallyDto,
    pub verdict: Option<VerdictDto>,
    pub analysis: Option<AnalysisSectionDto>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct OptimumDto {
    pub mu: f64,
    pub nu: f64,
    pub fraction: f64,
    pub rate: f64,
}

#[derive(Debug, Serialize)]
pub struct OptimizeReportDto {
    pub schema_version: u32,
    pub channel: ChannelDto,
    pub n_total: u64,
    pub params: ParamsEchoDto,
    pub optimum: OptimumDto,
    pub secure: bool,
}

#[derive(Debug, Serialize)]
pub struct FitReportDto {
    pub schema_version: u32,
    pub channel: ChannelDto,
    pub fit_residual_decoy_qber: f64,
}

/// Writes the per-intensity tally CSV.
pub fn write_tally_csv(path: &Path, tally: &SessionTally) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "label",
        "mean_photons",
        "send_fraction",
        "n_sent",
        "n_detected",
        "n_error",
        "gain",
        "qber",
        "n_sifted",
    ])?;
    for (s, sifted) in tally.per_intensity.iter().zip(&tally.sifted_lengths) {
        w.write_record([
            label_name(s.intensity.label).to_string(),
            format!("{}", s.intensity.mean_photons),
            format!("{}", s.intensity.send_fraction),
            s.n_sent.to_string(),
            s.n_detected.to_string(),
            s.n_error.to_string(),
            format!("{}", s.gain),
            format!("{}", s.qber),
            sifted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes sweep rows as distance_km,rate_per_pulse.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[(f64, f64)]) -> anyhow::Result<()> {
    writeln!(out, "distance_km,rate_per_pulse")?;
    for (d, r) in rows {
        writeln!(out, "{d},{r}")?;
    }
    Ok(())
}

/// Writes the optimum tuple as a one-row CSV.
pub fn write_optimum_csv<W: Write>(mut out: W, o: &OptimumDto) -> anyhow::Result<()> {
    writeln!(out, "mu,nu,fraction,rate")?;
    writeln!(out, "{},{},{},{}", o.mu, o.nu, o.fraction, o.rate)?;
    Ok(())
}
