//! VR service requirements per technology phase.
//!
//! Bit rates follow the progressive-video rule: three colour channels per
//! pixel, `bits_per_color` bits each, every pixel of the frame refreshed
//! `refresh_hz` times per second. The field-of-view variant counts both eyes.
//! Uncompressed rates are exact integers; compressed rates are exact
//! rationals so no rounding happens before display.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

use crate::{Error, ExactRate, Result, Scalar};

/// Human-perception angular resolution, pixels per degree.
pub const HUMAN_PPD: u32 = 60;
/// Minimum refresh rate for motion continuity, Hz.
pub const MIN_REFRESH_HZ: u32 = 120;
/// End-to-end VR interaction latency budget, ms.
pub const INTERACTION_LATENCY_MS: f64 = 10.0;
/// Fraction of the interaction latency allotted to the downlink.
pub const DEFAULT_DOWNLINK_SHARE: f64 = 0.7;
/// Low-latency codec compression ratio.
pub const LOW_LATENCY_RATIO: u64 = 20;
/// Lossy codec compression ratio.
pub const LOSSY_RATIO: u64 = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    PreVr,
    EntryVr,
    AdvancedVr,
    HumanPerception,
    UltimateVr,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::PreVr,
        Phase::EntryVr,
        Phase::AdvancedVr,
        Phase::HumanPerception,
        Phase::UltimateVr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::PreVr => "Pre-VR",
            Phase::EntryVr => "Entry-Level VR",
            Phase::AdvancedVr => "Advanced VR",
            Phase::HumanPerception => "Human Perception",
            Phase::UltimateVr => "Ultimate VR",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Display and service parameters of one VR phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpec {
    pub name: Phase,
    /// `None` where no typical session length is given.
    pub experience_duration: Option<&'static str>,
    pub full_view_width_px: u64,
    pub full_view_height_px: u64,
    pub eye_width_px: u64,
    pub eye_height_px: u64,
    /// Single-eye field of view, degrees.
    pub fov_h_deg: u32,
    pub fov_v_deg: u32,
    pub bits_per_color: u64,
    pub refresh_hz: u64,
    pub ppd: u32,
    pub rtt_budget_ms: f64,
    pub loss_target: f64,
}

impl PhaseSpec {
    /// Built-in parameters of `phase`.
    ///
    /// The human-perception column carries 12 bits per colour, the only
    /// depth consistent with its 1007.77 Gbps uncompressed rate.
    pub fn builtin(phase: Phase) -> Self {
        #[rustfmt::skip]
        let (dur, w, h, ew, eh, fh, fv, bpc, hz, ppd, rtt) = match phase {
            Phase::PreVr => (Some("less than 20 minutes"), 3840, 1920, 1080, 1080, 100, 100, 8, 60, 10, 10.0),
            Phase::EntryVr => (Some("less than 20 minutes"), 7680, 3840, 1920, 1920, 110, 110, 8, 90, 17, 10.0),
            Phase::AdvancedVr => (Some("less than an hour"), 11520, 5760, 3840, 3840, 120, 120, 10, 120, 32, 5.0),
            Phase::HumanPerception => (None, 21600, 10800, 9000, 8100, 150, 135, 12, 120, 60, 10.0),
            Phase::UltimateVr => (Some("more than an hour"), 23040, 11520, 9600, 9600, 150, 150, 12, 200, 64, 5.0),
        };
        PhaseSpec {
            name: phase,
            experience_duration: dur,
            full_view_width_px: w,
            full_view_height_px: h,
            eye_width_px: ew,
            eye_height_px: eh,
            fov_h_deg: fh,
            fov_v_deg: fv,
            bits_per_color: bpc,
            refresh_hz: hz,
            ppd,
            rtt_budget_ms: rtt,
            loss_target: 1e-6,
        }
    }

    pub fn builtins() -> Vec<PhaseSpec> {
        Phase::ALL.iter().map(|&p| PhaseSpec::builtin(p)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("full_view_width_px", self.full_view_width_px),
            ("full_view_height_px", self.full_view_height_px),
            ("eye_width_px", self.eye_width_px),
            ("eye_height_px", self.eye_height_px),
            ("bits_per_color", self.bits_per_color),
            ("refresh_hz", self.refresh_hz),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(name, "must be strictly positive"));
            }
        }
        if !(self.loss_target > 0.0 && self.loss_target < 1.0) {
            return Err(Error::invalid("loss_target", "must lie in (0, 1)"));
        }
        if !(self.rtt_budget_ms > 0.0) {
            return Err(Error::invalid("rtt_budget_ms", "must be positive"));
        }
        Ok(())
    }
}

/// Bit rate of an uncompressed progressive full-view stream, bits/s.
pub fn uncompressed_full_view_rate(
    width_px: u64,
    height_px: u64,
    bits_per_color: u64,
    refresh_hz: u64,
) -> u64 {
    width_px * height_px * 3 * bits_per_color * refresh_hz
}

/// Bit rate of an uncompressed stereo field-of-view stream (two eyes), bits/s.
pub fn uncompressed_fov_rate(
    eye_width_px: u64,
    eye_height_px: u64,
    bits_per_color: u64,
    refresh_hz: u64,
) -> u64 {
    2 * uncompressed_full_view_rate(eye_width_px, eye_height_px, bits_per_color, refresh_hz)
}

/// `uncompressed / ratio`. Works for floats and exact rationals alike.
pub fn compressed_rate<T>(uncompressed: T, ratio: T) -> Result<T>
where
    T: Num + PartialOrd + Copy,
{
    // written so that a NaN ratio is rejected too
    if !(ratio >= T::one()) {
        return Err(Error::invalid("ratio", "compression ratio must be >= 1"));
    }
    Ok(uncompressed / ratio)
}

/// Share of an interaction-latency budget left for the downlink, ms.
pub fn downlink_delay_budget<T: Scalar>(rtt_budget_ms: T, downlink_share: T) -> Result<T> {
    if !(rtt_budget_ms > T::zero()) {
        return Err(Error::invalid("rtt_budget_ms", "must be positive"));
    }
    if !(downlink_share > T::zero() && downlink_share <= T::one()) {
        return Err(Error::invalid("downlink_share", "must lie in (0, 1]"));
    }
    Ok(rtt_budget_ms * downlink_share)
}

/// Service requirements derived from a [`PhaseSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct QosRequirement {
    pub uncompressed_bps: u64,
    pub uncompressed_fov_bps: u64,
    /// Full view at the requested compression ratio.
    pub full_view_compressed_bps: ExactRate,
    pub fov_compressed_bps: ExactRate,
    /// Full view at [`LOSSY_RATIO`].
    pub full_view_lossy_bps: ExactRate,
    pub fov_lossy_bps: ExactRate,
    pub downlink_deadline_ms: f64,
    pub loss_target: f64,
}

/// Requirements of `phase` with `ratio` as the low-latency compression ratio.
pub fn phase_requirements(phase: &PhaseSpec, ratio: ExactRate) -> Result<QosRequirement> {
    phase.validate()?;
    let full = uncompressed_full_view_rate(
        phase.full_view_width_px,
        phase.full_view_height_px,
        phase.bits_per_color,
        phase.refresh_hz,
    );
    let fov = uncompressed_fov_rate(
        phase.eye_width_px,
        phase.eye_height_px,
        phase.bits_per_color,
        phase.refresh_hz,
    );
    let lossy = Ratio::from_integer(LOSSY_RATIO);
    Ok(QosRequirement {
        uncompressed_bps: full,
        uncompressed_fov_bps: fov,
        full_view_compressed_bps: compressed_rate(Ratio::from_integer(full), ratio)?,
        fov_compressed_bps: compressed_rate(Ratio::from_integer(fov), ratio)?,
        full_view_lossy_bps: compressed_rate(Ratio::from_integer(full), lossy)?,
        fov_lossy_bps: compressed_rate(Ratio::from_integer(fov), lossy)?,
        downlink_deadline_ms: downlink_delay_budget(phase.rtt_budget_ms, DEFAULT_DOWNLINK_SHARE)?,
        loss_target: phase.loss_target,
    })
}

pub fn rate_to_f64(rate: &ExactRate) -> f64 {
    rate.to_f64().unwrap_or(f64::NAN)
}

/// Formats a rate the way the requirement table prints it: two decimals in
/// Gbps from 1 Gbps upwards, whole Mbps below.
pub fn format_rate(bps: f64) -> String {
    if bps >= 1e9 {
        format!("{:.2} Gbps", bps / 1e9)
    } else {
        format!("{:.0} Mbps", bps / 1e6)
    }
}

/// Inverse of [`format_rate`] for `"<value> Gbps"` / `"<value> Mbps"` tokens.
pub fn parse_rate(text: &str) -> Option<f64> {
    let mut it = text.split_whitespace();
    let value: f64 = it.next()?.parse().ok()?;
    let scale = match it.next()? {
        "Gbps" => 1e9,
        "Mbps" => 1e6,
        "kbps" => 1e3,
        "bps" => 1.0,
        _ => return None,
    };
    Some(value * scale)
}

/// Row labels of the requirement table, top to bottom.
pub const TABLE_ROWS: [&str; 13] = [
    "Requirement",
    "Experience Duration",
    "Video Resolution",
    "Single-eye Resolution",
    "Field-of-View (Single-eye)",
    "Bit per Color (RGB)",
    "Refresh Rate",
    "Pixel per Degree",
    "Uncompressed Bit Rate (Progressive 1:1)",
    "Transmitting Bit Rate (Low-latency Compression 20:1)",
    "Transmitting Bit Rate (Lossy Compression 300:1)",
    "Typical Round Trip Time (RTT)",
    "Typical Packet Loss",
];

fn pair_cell(full: &ExactRate, fov: &ExactRate) -> String {
    format!(
        "{} (Full-view) {} (FoV)",
        format_rate(rate_to_f64(full)),
        format_rate(rate_to_f64(fov))
    )
}

/// The requirement table for the built-in phases as CSV, one column per phase.
pub fn qos_table_csv() -> Result<String> {
    let phases = PhaseSpec::builtins();
    let reqs = phases
        .iter()
        .map(|p| phase_requirements(p, Ratio::from_integer(LOW_LATENCY_RATIO)))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<Vec<String>> = TABLE_ROWS.iter().map(|r| vec![r.to_string()]).collect();
    for (p, q) in phases.iter().zip(&reqs) {
        let cells = [
            p.name.label().to_string(),
            p.experience_duration.unwrap_or("unspecified").to_string(),
            format!("{}x{}", p.full_view_width_px, p.full_view_height_px),
            format!("{}x{}", p.eye_width_px, p.eye_height_px),
            format!("{}x{}", p.fov_h_deg, p.fov_v_deg),
            p.bits_per_color.to_string(),
            p.refresh_hz.to_string(),
            p.ppd.to_string(),
            format_rate(q.uncompressed_bps as f64),
            pair_cell(&q.full_view_compressed_bps, &q.fov_compressed_bps),
            pair_cell(&q.full_view_lossy_bps, &q.fov_lossy_bps),
            format!("{} ms", p.rtt_budget_ms),
            format!("{:e}", p.loss_target),
        ];
        for (row, cell) in rows.iter_mut().zip(cells) {
            row.push(cell);
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
