//! Downlink video flows sliced into fixed-size bitplanes.
//!
//! A flow emits one frame every `1 / refresh_hz` seconds. Each frame carries
//! `bit_rate / refresh` bits cut into bitplanes of `bitplane_bits`; the last
//! plane of a frame holds the remainder. VR and traditional video share the
//! frame clock and deadlines and differ only in when a frame becomes
//! available to the sender (traditional video is prefetched into a jitter
//! buffer) and in whether stale data is dropped.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default bitplane size, bits.
pub const DEFAULT_BITPLANE_BITS: u64 = 1578;
/// Default per-user video rate, bits/s.
pub const DEFAULT_BIT_RATE_BPS: f64 = 768e6;
/// Refresh rate of the Advanced VR phase, Hz.
pub const DEFAULT_REFRESH_HZ: f64 = 120.0;
/// Downlink share of the 10 ms interaction budget, ms.
pub const DEFAULT_DEADLINE_MS: f64 = 7.0;
pub const DEFAULT_PREFETCH_MS: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    #[serde(alias = "vr")]
    Vr,
    #[serde(alias = "traditional")]
    TraditionalVideo,
}

impl TrafficKind {
    pub fn label(self) -> &'static str {
        match self {
            TrafficKind::Vr => "vr",
            TrafficKind::TraditionalVideo => "traditional",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub kind: TrafficKind,
    pub bit_rate_bps: f64,
    pub refresh_hz: f64,
    pub bitplane_bits: u64,
    pub deadline_ms: f64,
    /// How far ahead of its generation instant a frame may be sent.
    pub prefetch_ms: f64,
    pub drop_on_expiry: bool,
}

impl FlowConfig {
    pub fn vr() -> Self {
        FlowConfig {
            kind: TrafficKind::Vr,
            bit_rate_bps: DEFAULT_BIT_RATE_BPS,
            refresh_hz: DEFAULT_REFRESH_HZ,
            bitplane_bits: DEFAULT_BITPLANE_BITS,
            deadline_ms: DEFAULT_DEADLINE_MS,
            prefetch_ms: 0.0,
            drop_on_expiry: true,
        }
    }

    /// Buffered video: available `prefetch_ms` early, same deadline as VR.
    /// Stale frames are skipped, as a playout buffer would; without that a
    /// queue that ever falls behind misses every later deadline.
    pub fn traditional() -> Self {
        FlowConfig {
            kind: TrafficKind::TraditionalVideo,
            prefetch_ms: DEFAULT_PREFETCH_MS,
            ..FlowConfig::vr()
        }
    }

    pub fn of_kind(kind: TrafficKind) -> Self {
        match kind {
            TrafficKind::Vr => FlowConfig::vr(),
            TrafficKind::TraditionalVideo => FlowConfig::traditional(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bit_rate_bps > 0.0 && self.bit_rate_bps.is_finite()) {
            return Err(Error::invalid("bit_rate_bps", "must be positive"));
        }
        if !(self.refresh_hz > 0.0 && self.refresh_hz.is_finite()) {
            return Err(Error::invalid("refresh_hz", "must be positive"));
        }
        if self.bitplane_bits == 0 {
            return Err(Error::invalid("bitplane_bits", "must be positive"));
        }
        if !(self.deadline_ms > 0.0 && self.deadline_ms.is_finite()) {
            return Err(Error::invalid("deadline_ms", "must be positive"));
        }
        if !(self.prefetch_ms >= 0.0 && self.prefetch_ms.is_finite()) {
            return Err(Error::invalid("prefetch_ms", "must be non-negative"));
        }
        if self.kind == TrafficKind::Vr && self.prefetch_ms != 0.0 {
            return Err(Error::invalid("prefetch_ms", "VR flows cannot be prefetched"));
        }
        Ok(())
    }

    /// Bits in one frame, rounded up to a whole bit.
    pub fn frame_bits(&self) -> u64 {
        let x = self.bit_rate_bps / self.refresh_hz;
        let r = x.round();
        // absorb representation noise such as 6.4e6 * (1 + 1e-16)
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as u64
        } else {
            x.ceil() as u64
        }
    }

    /// Size of the final, possibly partial, bitplane of a frame.
    pub fn last_plane_bits(&self) -> u64 {
        let rem = self.frame_bits() % self.bitplane_bits;
        if rem == 0 {
            self.bitplane_bits
        } else {
            rem
        }
    }

    pub fn frame_period_s(&self) -> f64 {
        1.0 / self.refresh_hz
    }

    /// Number of frames generated strictly before `duration_s`.
    pub fn frame_count(&self, duration_s: f64) -> u64 {
        let x = duration_s * self.refresh_hz;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as u64
        } else {
            x.ceil() as u64
        }
    }

    /// Timing of frame `index`.
    pub fn frame(&self, index: u64) -> Frame {
        let gen_time = index as f64 / self.refresh_hz;
        Frame {
            index,
            gen_time,
            avail_time: (gen_time - self.prefetch_ms / 1e3).max(0.0),
            deadline: gen_time + self.deadline_ms / 1e3,
            n_planes: frame_bitplane_count(self),
            plane_bits: self.bitplane_bits,
            last_plane_bits: self.last_plane_bits(),
        }
    }
}

/// `ceil((bit_rate / refresh) / bitplane_bits)`.
pub fn frame_bitplane_count(cfg: &FlowConfig) -> u32 {
    cfg.frame_bits().div_ceil(cfg.bitplane_bits) as u32
}

/// One video frame: a run of bitplanes sharing timing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub gen_time: f64,
    pub avail_time: f64,
    pub deadline: f64,
    pub n_planes: u32,
    pub plane_bits: u64,
    pub last_plane_bits: u64,
}

impl Frame {
    pub fn plane_size(&self, plane: u32) -> u64 {
        if plane + 1 == self.n_planes {
            self.last_plane_bits
        } else {
            self.plane_bits
        }
    }

    pub fn total_bits(&self) -> u64 {
        (self.n_planes as u64 - 1) * self.plane_bits + self.last_plane_bits
    }

    pub fn bitplanes(&self, flow_id: u32) -> impl Iterator<Item = Bitplane> + '_ {
        (0..self.n_planes).map(move |p| Bitplane {
            flow_id,
            frame_index: self.index,
            plane_index: p,
            size_bits: self.plane_size(p),
            gen_time: self.gen_time,
            avail_time: self.avail_time,
            deadline: self.deadline,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bitplane {
    pub flow_id: u32,
    pub frame_index: u64,
    pub plane_index: u32,
    pub size_bits: u64,
    pub gen_time: f64,
    pub avail_time: f64,
    pub deadline: f64,
}

/// Frames of a flow over `duration_s`, lazily.
pub fn frames(cfg: &FlowConfig, duration_s: f64) -> Result<impl Iterator<Item = Frame> + '_> {
    cfg.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    Ok((0..cfg.frame_count(duration_s)).map(move |k| cfg.frame(k)))
}

/// Every bitplane of a flow over `duration_s`, ordered by generation time
/// and plane index.
pub fn generate(cfg: &FlowConfig, duration_s: f64) -> Result<Vec<Bitplane>> {
    generate_flow(cfg, duration_s, 0)
}

pub fn generate_flow(cfg: &FlowConfig, duration_s: f64, flow_id: u32) -> Result<Vec<Bitplane>> {
    let mut out = Vec::new();
    for f in frames(cfg, duration_s)? {
        out.extend(f.bitplanes(flow_id));
    }
    Ok(out)
}
