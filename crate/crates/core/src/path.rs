//! Brownian paths on grids and the seeding contract.
//!
//! Every random number is addressed by `(master_seed, lane, replication,
//! draw_index)`: the ChaCha key is derived from the seed and lane, the ChaCha
//! stream id is the replication, and the draw index is the block position.
//! Replications can therefore be simulated in any order on any number of
//! threads and still reproduce bit for bit.

use std::io::Write;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Independent families of draws within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    /// Increments of the path on its base grid.
    Brownian,
    /// Conditional draws for bridge refinement.
    Bridge,
    /// Random initial values.
    InitialValue,
}

impl Lane {
    fn tag(self) -> u64 {
        match self {
            Lane::Brownian => 0x42_52_4f_57_4e, // "BROWN"
            Lane::Bridge => 0x42_52_49_44_47,   // "BRIDG"
            Lane::InitialValue => 0x58_49,      // "XI"
        }
    }
}

/// Counter-based random stream keyed by `(master_seed, replication)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub replication: u64,
    pub lane: Lane,
}

impl RngStream {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            master_seed,
            replication,
            lane: Lane::Brownian,
        }
    }

    pub fn with_lane(self, lane: Lane) -> Self {
        Self { lane, ..self }
    }

    fn generator(&self) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.lane.tag().to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(self.replication);
        rng
    }

    /// Standard normal draws in draw-index order.
    pub fn normals(&self) -> NormalDraws {
        NormalDraws {
            rng: self.generator(),
        }
    }

    /// Uniform draws on the open interval (0, 1) in draw-index order.
    pub fn uniforms(&self) -> UniformDraws {
        UniformDraws {
            rng: self.generator(),
        }
    }

    /// The `draw_index`-th standard normal of this stream, without generating
    /// its predecessors.
    pub fn normal_at(&self, draw_index: u64) -> f64 {
        let mut rng = self.generator();
        // Each draw consumes one u64, i.e. two 32-bit words.
        rng.set_word_pos(u128::from(draw_index) * 2);
        inverse_normal_cdf(open_unit(rng.next_u64()))
    }
}

/// Maps 53 random bits to the cell midpoints `(i + 1/2) 2^-53`, never 0 or 1.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub struct NormalDraws {
    rng: ChaCha12Rng,
}

impl Iterator for NormalDraws {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(inverse_normal_cdf(open_unit(self.rng.next_u64())))
    }
}

pub struct UniformDraws {
    rng: ChaCha12Rng,
}

impl Iterator for UniformDraws {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(open_unit(self.rng.next_u64()))
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Standard normal quantile for `p ∈ (0, 1)`, Wichura's AS 241 (PPND16),
/// relative accuracy about 1e-16.
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Law of the initial value `xi`, drawn independently of the Brownian path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialValue {
    Deterministic(f64),
    Uniform { uniform: [f64; 2] },
}

impl InitialValue {
    /// Realized `xi` for one replication (first draw of its initial-value
    /// lane).
    pub fn sample(&self, stream: RngStream) -> f64 {
        match *self {
            InitialValue::Deterministic(x) => x,
            InitialValue::Uniform { uniform: [lo, hi] } => {
                let u = stream
                    .with_lane(Lane::InitialValue)
                    .uniforms()
                    .next()
                    .unwrap_or(0.5);
                lo + (hi - lo) * u
            }
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            InitialValue::Deterministic(x) if x.is_finite() => Ok(self),
            InitialValue::Uniform { uniform: [lo, hi] }
                if lo.is_finite() && hi.is_finite() && lo < hi =>
            {
                Ok(self)
            }
            _ => Err(Error::invalid("xi", format!("unusable initial value {self:?}"))),
        }
    }
}

impl std::str::FromStr for InitialValue {
    type Err = Error;

    /// `0.5` or `uniform:lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = if let Some(rest) = s.strip_prefix("uniform:") {
            let (lo, hi) = rest
                .split_once(':')
                .ok_or_else(|| Error::parse("initial value", s, "expected uniform:lo:hi"))?;
            let lo = lo.parse().map_err(|_| Error::parse("initial value", s, "bad lower bound"))?;
            let hi = hi.parse().map_err(|_| Error::parse("initial value", s, "bad upper bound"))?;
            InitialValue::Uniform { uniform: [lo, hi] }
        } else {
            InitialValue::Deterministic(
                s.parse()
                    .map_err(|_| Error::parse("initial value", s, "expected a number or uniform:lo:hi"))?,
            )
        };
        parsed.validate()
    }
}

impl std::fmt::Display for InitialValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialValue::Deterministic(x) => write!(f, "{x}"),
            InitialValue::Uniform { uniform: [lo, hi] } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

/// Identifies the stream a path was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub master_seed: u64,
    pub replication: u64,
}

impl From<RngStream> for StreamId {
    fn from(s: RngStream) -> Self {
        Self {
            master_seed: s.master_seed,
            replication: s.replication,
        }
    }
}

/// Brownian values `W(t_0), ..., W(t_n)` on a grid, `W(t_0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: Grid,
    values: Vec<f64>,
    stream_id: Option<StreamId>,
}

impl BrownianPath {
    /// Wraps given values, e.g. a fixed path for deterministic checks.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.times().len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for {} grid times", values.len(), grid.times().len()),
            ));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid("values", "a Brownian path starts at 0"));
        }
        Ok(Self {
            grid,
            values,
            stream_id: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stream_id(&self) -> Option<StreamId> {
        self.stream_id
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Sub-path on a coarser grid nested in this path's grid. Exact.
    pub fn restrict(&self, coarse: &Grid) -> Result<BrownianPath> {
        let map = coarse.embedding(&self.grid)?;
        Ok(BrownianPath {
            grid: coarse.clone(),
            values: map.iter().map(|&j| self.values[j]).collect(),
            stream_id: self.stream_id,
        })
    }

    /// Extends the path to a finer grid containing the current one. Known
    /// values are copied; each new time is drawn from the Brownian bridge
    /// between its left neighbour (already fixed) and the next known time.
    pub fn bridge_refine(&self, fine: &Grid, stream: RngStream) -> Result<BrownianPath> {
        let map = self.grid.embedding(fine)?;
        let times = fine.times();
        let mut values = vec![0.0; times.len()];
        let mut draws = stream.with_lane(Lane::Bridge).normals();
        for (k, pair) in map.windows(2).enumerate() {
            let (start, end) = (pair[0], pair[1]);
            values[start] = self.values[k];
            let (t_end, w_end) = (times[end], self.values[k + 1]);
            for j in start + 1..end {
                let (s, w_s) = (times[j - 1], values[j - 1]);
                let t = times[j];
                let mean = w_s + (t - s) / (t_end - s) * (w_end - w_s);
                let var = (t - s) * (t_end - t) / (t_end - s);
                values[j] = mean + var.sqrt() * draws.next().unwrap_or(0.0);
            }
        }
        if let (Some(&last), Some(&w)) = (map.last(), self.values.last()) {
            values[last] = w;
        }
        Ok(BrownianPath {
            grid: fine.clone(),
            values,
            stream_id: self.stream_id,
        })
    }

    /// CSV with header `t,W`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,W")?;
        for (t, w) in self.grid.times().iter().zip(&self.values) {
            writeln!(out, "{t},{w}")?;
        }
        Ok(())
    }
}

/// `W(t_{k+1}) = W(t_k) + sqrt(t_{k+1} - t_k) Z_k` with `Z_k` taken from the
/// stream's Brownian lane in index order.
pub fn sample_brownian(grid: &Grid, stream: RngStream) -> BrownianPath {
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    let mut w = 0.0;
    let mut draws = stream.with_lane(Lane::Brownian).normals();
    for pair in times.windows(2) {
        w += (pair[1] - pair[0]).sqrt() * draws.next().unwrap_or(0.0);
        values.push(w);
    }
    BrownianPath {
        grid: grid.clone(),
        values,
        stream_id: Some(stream.into()),
    }
}
